//! Command-line front end: synthetic cities, backbone construction,
//! workload generation, simulation, reporting, sweeps, and plot data.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation/runtime failure,
//! 3 sweep completed with per-cell failures.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;
use umst_net::graph::WeightKind;
use umst_net::io;
use umst_net::metrics::compute_metrics;
use umst_net::sim::{
    run_simulation, validate_trace, validate_trace_partial, FleetConfig, SimTrace, SpawnMode,
};
use umst_net::sweep::{emit_plot_data, run_sweep, BackboneKind, BundlingMode, PlotKind, SweepConfig};
use umst_net::synth::{generate_synthetic_city, BoundingBox, Placement, SyntheticCityConfig};
use umst_net::umst::{build_umst, UmstConfig};
use umst_net::workload::{generate_requests, DeadlinePolicy, WorkloadConfig};

#[derive(Parser)]
#[command(
    name = "umst-net",
    version,
    about = "Sparse delivery backbones from unions of minimum spanning trees, with a deterministic bundling simulator"
)]
struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Uniform,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum BundlingArg {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKindArg {
    SuccessVsTime,
    SuccessVsDistance,
    EdgesVsK,
}

impl From<PlotKindArg> for PlotKind {
    fn from(k: PlotKindArg) -> Self {
        match k {
            PlotKindArg::SuccessVsTime => PlotKind::SuccessVsTime,
            PlotKindArg::SuccessVsDistance => PlotKind::SuccessVsDistance,
            PlotKindArg::EdgesVsK => PlotKind::EdgesVsK,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Distance,
    TravelTime,
}

#[derive(Args)]
struct GenCity {
    /// Number of hotspots.
    #[arg(long, short)]
    n: u32,
    /// Bounding box as lat_min,lat_max,lon_min,lon_max.
    #[arg(long, default_value = "41.80,41.90,-87.70,-87.60")]
    bbox: String,
    #[arg(long, value_enum, default_value = "uniform")]
    placement: PlacementArg,
    /// Jitter fraction for grid placement.
    #[arg(long, default_value_t = 0.4)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildUmst {
    /// Graph or city JSON file.
    #[arg(long)]
    graph: PathBuf,
    /// Number of MSTs to union.
    #[arg(long, short, default_value_t = 20)]
    k: u32,
    /// Edge drop rate per iteration.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    attempts: u32,
    /// Weight minimized by each sampled tree.
    #[arg(long, value_enum, default_value = "distance")]
    mst_weight: WeightArg,
    /// Fleet speed used to complete city files into graphs.
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenWorkload {
    /// Graph or city JSON file (deadlines use its complete-graph travel times).
    #[arg(long)]
    graph: PathBuf,
    /// Total number of requests.
    #[arg(long, short, default_value_t = 9234)]
    n: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3600.0)]
    horizon_s: f64,
    /// Peak centers as fractions of the horizon, comma-separated.
    #[arg(long, default_value = "0.25,0.75")]
    peaks: String,
    #[arg(long, default_value_t = 10.0)]
    sigma_min: f64,
    #[arg(long, default_value_t = 1800.0)]
    max_trip_s: f64,
    /// Deadline policy: scaled:ALPHA:BETA_S or fixed:BUDGET_S.
    #[arg(long, default_value = "scaled:2.0:600")]
    deadline: String,
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Simulate {
    /// Backbone, graph, or city JSON file.
    #[arg(long)]
    backbone: PathBuf,
    /// Request CSV file.
    #[arg(long)]
    requests: PathBuf,
    #[arg(long, default_value_t = 5)]
    capacity: u32,
    /// Dispatch hold window in seconds.
    #[arg(long, default_value_t = 30.0)]
    hold: f64,
    #[arg(long, value_enum, default_value = "on")]
    bundling: OnOff,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fixed vehicle pool size (on-demand spawning when omitted).
    #[arg(long)]
    pool: Option<u32>,
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    /// Output JSONL trace path.
    #[arg(long)]
    trace: PathBuf,
}

#[derive(Args)]
struct Report {
    /// Trace JSONL file.
    #[arg(long)]
    trace: PathBuf,
    /// Request CSV the trace was generated from.
    #[arg(long)]
    requests: PathBuf,
    /// Paired no-bundling trace for the distance-saved column.
    #[arg(long)]
    baseline_trace: Option<PathBuf>,
    /// Backbone file; enables full edge/timing validation.
    #[arg(long)]
    backbone: Option<PathBuf>,
    /// Capacity the trace was produced with.
    #[arg(long, default_value_t = 5)]
    capacity: u32,
    #[arg(long, value_enum, default_value = "on")]
    bundling: OnOff,
    #[arg(long, default_value = "run")]
    label: String,
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Sweep {
    /// Graph or city JSON file.
    #[arg(long)]
    graph: PathBuf,
    /// K values, comma-separated.
    #[arg(long, default_value = "10,20,40,100")]
    k: String,
    /// Drop rates, comma-separated.
    #[arg(long, default_value = "0.1,0.2,0.5,0.7")]
    rho: String,
    /// Seeds: comma-separated list or A..B range.
    #[arg(long, default_value = "0..10")]
    seeds: String,
    /// Backbones to evaluate, comma-separated subset of clique,mst,umst.
    #[arg(long, default_value = "clique,mst,umst")]
    backbones: String,
    #[arg(long, value_enum, default_value = "on")]
    bundling: BundlingArg,
    /// Requests per cell.
    #[arg(long, default_value_t = 9234)]
    requests_n: u32,
    #[arg(long, default_value_t = 5)]
    capacity: u32,
    #[arg(long, default_value_t = 30.0)]
    hold: f64,
    #[arg(long, default_value_t = 30.0)]
    speed_kmh: f64,
    /// Recompute cells whose reports already exist.
    #[arg(long)]
    force: bool,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotData {
    /// aggregate.csv produced by the sweep command.
    #[arg(long)]
    aggregate: PathBuf,
    #[arg(long, value_enum)]
    kind: PlotKindArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city (hotspots only).
    GenCity(GenCity),
    /// Build a union-of-MSTs backbone from a graph.
    BuildUmst(BuildUmst),
    /// Generate a delivery-request workload.
    GenWorkload(GenWorkload),
    /// Run the delivery simulation and write an event trace.
    Simulate(Simulate),
    /// Compute metrics from a trace.
    Report(Report),
    /// Run a full (backbone, K, rho, seed) experiment sweep.
    Sweep(Sweep),
    /// Extract plot-ready CSV columns from a sweep aggregate.
    PlotData(PlotData),
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad {what} '{p}': {e}")))
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let start: u64 = a.trim().parse().map_err(|e| format!("bad seed range start '{a}': {e}"))?;
        let end: u64 = b.trim().parse().map_err(|e| format!("bad seed range end '{b}': {e}"))?;
        if end <= start {
            return Err(format!("empty seed range {s}"));
        }
        return Ok((start..end).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed '{p}': {e}")))
        .collect()
}

fn parse_bbox(s: &str) -> Result<BoundingBox, String> {
    let parts = parse_f64_list(s, "bbox coordinate")?;
    if parts.len() != 4 {
        return Err(format!("bbox needs 4 comma-separated values, got {}", parts.len()));
    }
    Ok(BoundingBox { lat_min: parts[0], lat_max: parts[1], lon_min: parts[2], lon_max: parts[3] })
}

fn parse_deadline(s: &str) -> Result<DeadlinePolicy, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["scaled", alpha, beta] => Ok(DeadlinePolicy::ScaledShortestPath {
            alpha: alpha.parse().map_err(|e| format!("bad alpha '{alpha}': {e}"))?,
            beta_s: beta.parse().map_err(|e| format!("bad beta '{beta}': {e}"))?,
        }),
        ["fixed", budget] => Ok(DeadlinePolicy::FixedBudget {
            budget_s: budget.parse().map_err(|e| format!("bad budget '{budget}': {e}"))?,
        }),
        _ => Err(format!("bad deadline policy '{s}' (expected scaled:ALPHA:BETA or fixed:BUDGET)")),
    }
}

fn parse_backbones(s: &str) -> Result<Vec<BackboneKind>, String> {
    s.split(',')
        .map(|p| match p.trim() {
            "clique" => Ok(BackboneKind::Clique),
            "mst" => Ok(BackboneKind::Mst),
            "umst" => Ok(BackboneKind::Umst),
            other => Err(format!("unknown backbone '{other}'")),
        })
        .collect()
}

fn load_trace(
    path: &std::path::Path,
    requests: &[umst_net::workload::DeliveryRequest],
    capacity: u32,
    bundling: bool,
) -> Result<SimTrace, String> {
    let events = io::load_trace_events(path).map_err(|e| e.to_string())?;
    SimTrace::from_events(events, requests, capacity, bundling, 0).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    let info = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };
    match cli.command {
        Command::GenCity(a) => {
            let cfg = SyntheticCityConfig {
                n_hotspots: a.n,
                bbox: parse_bbox(&a.bbox)?,
                placement: match a.placement {
                    PlacementArg::Uniform => Placement::UniformRandom,
                    PlacementArg::Grid => Placement::GridJitter { cell_jitter_fraction: a.jitter },
                },
                rng_seed: a.seed,
            };
            let city = generate_synthetic_city(&cfg).map_err(|e| e.to_string())?;
            io::save_city(&city, &a.out).map_err(|e| e.to_string())?;
            info(format!("wrote {} hotspots to {}", city.len(), a.out.display()));
        }
        Command::BuildUmst(a) => {
            let g = io::load_graph(&a.graph, a.speed_kmh).map_err(|e| e.to_string())?;
            let cfg = UmstConfig {
                k_trees: a.k,
                drop_rate: a.rho,
                rng_seed: a.seed,
                max_resample_attempts: a.attempts,
                mst_weight: match a.mst_weight {
                    WeightArg::Distance => WeightKind::Distance,
                    WeightArg::TravelTime => WeightKind::TravelTime,
                },
            };
            let backbone = build_umst(&g, &cfg).map_err(|e| e.to_string())?;
            io::save_backbone(&backbone, &a.out).map_err(|e| e.to_string())?;
            info(format!(
                "backbone: {} of {} edges ({:.1}% reduction) -> {}",
                backbone.edge_count(),
                g.edge_count(),
                100.0 * (1.0 - backbone.edge_count() as f64 / g.edge_count() as f64),
                a.out.display()
            ));
        }
        Command::GenWorkload(a) => {
            let g = io::load_graph(&a.graph, a.speed_kmh).map_err(|e| e.to_string())?;
            let cfg = WorkloadConfig {
                horizon_s: a.horizon_s,
                total_requests: a.n,
                peak_fractions: parse_f64_list(&a.peaks, "peak fraction")?,
                sigma_min: a.sigma_min,
                max_trip_s: a.max_trip_s,
                deadline_policy: parse_deadline(&a.deadline)?,
                rng_seed: a.seed,
                hotspot_weights: None,
            };
            let requests = generate_requests(&g, &cfg).map_err(|e| e.to_string())?;
            io::save_requests(&requests, &a.out).map_err(|e| e.to_string())?;
            info(format!("wrote {} requests to {}", requests.len(), a.out.display()));
        }
        Command::Simulate(a) => {
            let g = io::load_routing_graph(&a.backbone, a.speed_kmh).map_err(|e| e.to_string())?;
            let requests = io::load_requests(&a.requests).map_err(|e| e.to_string())?;
            let fleet = FleetConfig {
                vehicle_capacity: a.capacity,
                dispatch_hold_s: a.hold,
                vehicle_speed_kmh: a.speed_kmh,
                spawn_mode: match a.pool {
                    Some(size) => SpawnMode::FixedPool { size },
                    None => SpawnMode::OnDemand,
                },
                bundling_enabled: matches!(a.bundling, OnOff::On),
            };
            let trace = run_simulation(&g, &requests, &fleet, a.seed).map_err(|e| e.to_string())?;
            io::save_trace_events(&trace.events, &a.trace).map_err(|e| e.to_string())?;
            let delivered = trace.outcomes.iter().filter(|o| o.completed).count();
            info(format!(
                "simulated {} requests ({} delivered, {} vehicles) -> {}",
                requests.len(),
                delivered,
                trace.vehicles.len(),
                a.trace.display()
            ));
        }
        Command::Report(a) => {
            let requests = io::load_requests(&a.requests).map_err(|e| e.to_string())?;
            let bundling = matches!(a.bundling, OnOff::On);
            let trace = load_trace(&a.trace, &requests, a.capacity, bundling)?;
            let validation = match &a.backbone {
                Some(path) => {
                    let g = io::load_routing_graph(path, a.speed_kmh).map_err(|e| e.to_string())?;
                    validate_trace(&trace, &g, &requests)
                }
                None => validate_trace_partial(&trace, &requests),
            };
            if !validation.is_clean() {
                for v in &validation.violations {
                    eprintln!("violation [{:?}]: {}", v.kind, v.message);
                }
                return Err(format!(
                    "trace failed validation with {} violation(s)",
                    validation.violations.len()
                ));
            }
            let mut report = compute_metrics(&trace, &requests, &validation).map_err(|e| e.to_string())?;
            report.label = a.label.clone();
            if let Some(baseline_path) = &a.baseline_trace {
                let baseline_trace = load_trace(baseline_path, &requests, a.capacity, false)?;
                let baseline_validation = validate_trace_partial(&baseline_trace, &requests);
                let baseline = compute_metrics(&baseline_trace, &requests, &baseline_validation)
                    .map_err(|e| e.to_string())?;
                report.apply_baseline(&baseline).map_err(|e| e.to_string())?;
            }
            io::save_report(&report, &a.out).map_err(|e| e.to_string())?;
            info(format!(
                "success {:.3} completion {:.3} vehicle {:.1} km package {:.1} km -> {}",
                report.success_rate,
                report.completion_rate,
                report.vehicle_distance_km,
                report.package_distance_km,
                a.out.display()
            ));
        }
        Command::Sweep(a) => {
            let g = io::load_graph(&a.graph, a.speed_kmh).map_err(|e| e.to_string())?;
            let sweep = SweepConfig {
                k_values: a
                    .k
                    .split(',')
                    .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad k '{p}': {e}")))
                    .collect::<Result<_, _>>()?,
                rho_values: parse_f64_list(&a.rho, "rho")?,
                seeds: parse_seeds(&a.seeds)?,
                backbones: parse_backbones(&a.backbones)?,
                bundling: match a.bundling {
                    BundlingArg::On => BundlingMode::On,
                    BundlingArg::Off => BundlingMode::Off,
                    BundlingArg::Both => BundlingMode::Both,
                },
            };
            let workload = WorkloadConfig { total_requests: a.requests_n, ..WorkloadConfig::default() };
            let fleet = FleetConfig {
                vehicle_capacity: a.capacity,
                dispatch_hold_s: a.hold,
                vehicle_speed_kmh: a.speed_kmh,
                ..FleetConfig::default()
            };
            let summary =
                run_sweep(&sweep, &g, &workload, &fleet, &a.out, a.force).map_err(|e| e.to_string())?;
            info(format!(
                "sweep: {} cells ({} computed, {} reused), {} failure(s) -> {}",
                summary.cells_total,
                summary.cells_computed,
                summary.cells_reused,
                summary.failures.len(),
                a.out.display()
            ));
            if !summary.failures.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::PlotData(a) => {
            emit_plot_data(&a.aggregate, a.kind.into(), &a.out).map_err(|e| e.to_string())?;
            info(format!("wrote plot data to {}", a.out.display()));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap reports --help/--version through the error path with a
            // success status; real usage errors exit 1
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
