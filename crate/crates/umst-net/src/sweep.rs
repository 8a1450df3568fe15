//! Resumable experiment sweeps over (backbone, K, rho, seed, bundling)
//! cells, with per-cell report files, an aggregate CSV, per-config summary
//! statistics, and plot-ready CSV extraction.
//!
//! Cells are independent and may run in parallel; the `UMST_NET_THREADS`
//! environment variable caps the worker count. Existing per-cell reports
//! are reused unless `force` is set, so an interrupted sweep resumes to
//! byte-identical outputs.

use crate::graph::{minimum_spanning_tree, HotspotGraph, WeightKind};
use crate::io::{self, IoError};
use crate::metrics::{
    compute_metrics, nash_bargaining_select, SimReport, TradeoffPoint,
};
use crate::sim::{run_simulation, validate_trace, FleetConfig};
use crate::umst::{build_umst, UmstConfig};
use crate::workload::{generate_requests, WorkloadConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("unknown plot kind '{0}' (expected success-vs-time, success-vs-distance, edges-vs-k)")]
    UnknownPlotKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Clique,
    Mst,
    Umst,
}

impl BackboneKind {
    fn name(&self) -> &'static str {
        match self {
            BackboneKind::Clique => "clique",
            BackboneKind::Mst => "mst",
            BackboneKind::Umst => "umst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundlingMode {
    On,
    Off,
    Both,
}

impl BundlingMode {
    fn flags(&self) -> &'static [bool] {
        match self {
            BundlingMode::On => &[true],
            BundlingMode::Off => &[false],
            BundlingMode::Both => &[true, false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub k_values: Vec<u32>,
    pub rho_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub backbones: Vec<BackboneKind>,
    pub bundling: BundlingMode,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k_values: vec![10, 20, 40, 100],
            rho_values: vec![0.1, 0.2, 0.5, 0.7],
            seeds: (0..10).collect(),
            backbones: vec![BackboneKind::Clique, BackboneKind::Mst, BackboneKind::Umst],
            bundling: BundlingMode::On,
        }
    }
}

/// One sweep cell: a backbone configuration evaluated on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub backbone: BackboneKind,
    pub k_trees: Option<u32>,
    pub rho: Option<f64>,
    pub seed: u64,
    pub bundling: bool,
}

impl SweepCell {
    /// Unique cell label, e.g. `umst_k20_r0.50_s3_bon`.
    pub fn label(&self) -> String {
        format!("{}_s{}_{}", self.config_label(), self.seed, if self.bundling { "bon" } else { "boff" })
    }

    /// Seed-independent configuration label, e.g. `umst_k20_r0.50_bon`.
    pub fn config_label(&self) -> String {
        match (self.k_trees, self.rho) {
            (Some(k), Some(rho)) => format!("{}_k{}_r{:.2}", self.backbone.name(), k, rho),
            _ => self.backbone.name().to_string(),
        }
    }

    fn group_label(&self) -> String {
        format!("{}_{}", self.config_label(), if self.bundling { "bon" } else { "boff" })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellFailure {
    pub label: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells_total: usize,
    pub cells_computed: usize,
    pub cells_reused: usize,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone)]
struct CellOutcome {
    cell: SweepCell,
    edge_count: usize,
    report: SimReport,
    reused: bool,
}

fn enumerate_cells(sweep: &SweepConfig) -> Result<Vec<SweepCell>, SweepError> {
    if sweep.k_values.is_empty()
        || sweep.rho_values.is_empty()
        || sweep.seeds.is_empty()
        || sweep.backbones.is_empty()
    {
        return Err(SweepError::InvalidConfig("k_values, rho_values, seeds, and backbones must be nonempty".into()));
    }
    let mut cells = Vec::new();
    for &backbone in &sweep.backbones {
        let configs: Vec<(Option<u32>, Option<f64>)> = match backbone {
            BackboneKind::Umst => sweep
                .k_values
                .iter()
                .flat_map(|&k| sweep.rho_values.iter().map(move |&r| (Some(k), Some(r))))
                .collect(),
            _ => vec![(None, None)],
        };
        for (k_trees, rho) in configs {
            for &seed in &sweep.seeds {
                for &bundling in sweep.bundling.flags() {
                    cells.push(SweepCell { backbone, k_trees, rho, seed, bundling });
                }
            }
        }
    }
    Ok(cells)
}

fn backbone_graph(cell: &SweepCell, city: &HotspotGraph) -> Result<HotspotGraph, String> {
    match cell.backbone {
        BackboneKind::Clique => Ok(city.clone()),
        BackboneKind::Mst => {
            let tree = minimum_spanning_tree(city, WeightKind::Distance).map_err(|e| e.to_string())?;
            city.with_edges(tree).map_err(|e| e.to_string())
        }
        BackboneKind::Umst => {
            let cfg = UmstConfig {
                k_trees: cell.k_trees.expect("umst cells carry K"),
                drop_rate: cell.rho.expect("umst cells carry rho"),
                rng_seed: cell.seed,
                ..UmstConfig::default()
            };
            Ok(build_umst(city, &cfg).map_err(|e| e.to_string())?.graph().clone())
        }
    }
}

fn run_cell(
    cell: &SweepCell,
    city: &HotspotGraph,
    workload: &WorkloadConfig,
    fleet: &FleetConfig,
    report_path: &Path,
    force: bool,
) -> Result<CellOutcome, String> {
    let graph = backbone_graph(cell, city)?;
    let edge_count = graph.edge_count();
    if !force && report_path.exists() {
        let report = io::load_report(report_path).map_err(|e| e.to_string())?;
        return Ok(CellOutcome { cell: cell.clone(), edge_count, report, reused: true });
    }
    let wl = WorkloadConfig { rng_seed: cell.seed, ..workload.clone() };
    // deadlines always come from the complete graph, not the backbone
    let requests = generate_requests(city, &wl).map_err(|e| e.to_string())?;
    let cell_fleet = FleetConfig { bundling_enabled: cell.bundling, ..fleet.clone() };
    let trace = run_simulation(&graph, &requests, &cell_fleet, cell.seed).map_err(|e| e.to_string())?;
    let validation = validate_trace(&trace, &graph, &requests);
    let mut report = compute_metrics(&trace, &requests, &validation).map_err(|e| e.to_string())?;
    report.label = cell.label();
    io::save_report(&report, report_path).map_err(|e| e.to_string())?;
    Ok(CellOutcome { cell: cell.clone(), edge_count, report, reused: false })
}

/// Runs every cell of the sweep, writing per-cell reports plus
/// `aggregate.csv`, `summary.csv`, and (on failures) `failures.json`
/// under `out_dir`. Per-cell failures are recorded, not fatal.
pub fn run_sweep(
    sweep: &SweepConfig,
    city: &HotspotGraph,
    workload: &WorkloadConfig,
    fleet: &FleetConfig,
    out_dir: &Path,
    force: bool,
) -> Result<SweepSummary, SweepError> {
    let cells = enumerate_cells(sweep)?;
    let reports_dir = out_dir.join("reports");
    std::fs::create_dir_all(&reports_dir)
        .map_err(|e| IoError::Io { path: reports_dir.display().to_string(), source: e })?;

    let threads = std::env::var("UMST_NET_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SweepError::ThreadPool(e.to_string()))?;

    let results: Vec<Result<CellOutcome, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let path = reports_dir.join(format!("{}.json", cell.label()));
                run_cell(cell, city, workload, fleet, &path, force)
                    .map_err(|error| CellFailure { label: cell.label(), error })
            })
            .collect()
    });

    let mut outcomes: Vec<CellOutcome> = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }

    // paired distance saved: a bundling-on cell gets the matching off run
    // of the same configuration and seed as its baseline
    let off_by_key: BTreeMap<(String, u64), SimReport> = outcomes
        .iter()
        .filter(|o| !o.cell.bundling)
        .map(|o| ((o.cell.config_label(), o.cell.seed), o.report.clone()))
        .collect();
    for o in &mut outcomes {
        if o.cell.bundling {
            if let Some(baseline) = off_by_key.get(&(o.cell.config_label(), o.cell.seed)) {
                if o.report.apply_baseline(baseline).is_ok() {
                    let path = reports_dir.join(format!("{}.json", o.cell.label()));
                    io::save_report(&o.report, &path)?;
                }
            }
        }
    }

    outcomes.sort_by(|a, b| a.cell.label().cmp(&b.cell.label()));
    write_aggregate(&outcomes, &out_dir.join("aggregate.csv"))?;
    write_summary(&outcomes, &out_dir.join("summary.csv"))?;

    if !failures.is_empty() {
        let path = out_dir.join("failures.json");
        let file = std::fs::File::create(&path)
            .map_err(|e| IoError::Io { path: path.display().to_string(), source: e })?;
        serde_json::to_writer_pretty(file, &failures)
            .map_err(|e| IoError::Json { path: path.display().to_string(), source: e })?;
    }

    let reused = outcomes.iter().filter(|o| o.reused).count();
    Ok(SweepSummary {
        cells_total: cells.len(),
        cells_computed: outcomes.len() - reused,
        cells_reused: reused,
        failures,
    })
}

const AGGREGATE_HEADER: &str = "label,backbone,k_trees,rho,seed,bundling,edge_count,total_deliveries,completed,successful,success_rate,completion_rate,avg_time_s,median_time_s,vehicle_distance_km,package_distance_km,distance_saved_paired_km,package_minus_vehicle_km,bundling_participation,bundles_created,avg_delay_s,median_delay_s,max_delay_s";

fn write_aggregate(outcomes: &[CellOutcome], path: &Path) -> Result<(), SweepError> {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for o in outcomes {
        let c = &o.cell;
        let r = &o.report;
        let fmt_opt_u = c.k_trees.map(|k| k.to_string()).unwrap_or_default();
        let fmt_opt_r = c.rho.map(|r| format!("{r}")).unwrap_or_default();
        let paired = r.distance_saved_vs_baseline_km.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.label(),
            c.backbone.name(),
            fmt_opt_u,
            fmt_opt_r,
            c.seed,
            if c.bundling { "on" } else { "off" },
            o.edge_count,
            r.total_deliveries,
            r.completed,
            r.successful,
            r.success_rate,
            r.completion_rate,
            r.avg_time_s,
            r.median_time_s,
            r.vehicle_distance_km,
            r.package_distance_km,
            paired,
            r.package_minus_vehicle_km,
            r.bundling_participation,
            r.bundles_created,
            r.avg_delay_s,
            r.median_delay_s,
            r.max_delay_s
        ));
    }
    std::fs::write(path, out).map_err(|e| IoError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_summary(outcomes: &[CellOutcome], path: &Path) -> Result<(), SweepError> {
    let mut groups: BTreeMap<String, Vec<&CellOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry(o.cell.group_label()).or_default().push(o);
    }
    let mut out = String::from(
        "label,runs,edge_count_mean,success_rate_mean,success_rate_std,avg_time_s_mean,avg_time_s_std,vehicle_distance_km_mean,vehicle_distance_km_std,package_distance_km_mean,package_distance_km_std,bundling_participation_mean,bundling_participation_std\n",
    );
    for (label, os) in groups {
        let col = |f: fn(&CellOutcome) -> f64| -> (f64, f64) {
            mean_std(&os.iter().map(|o| f(o)).collect::<Vec<_>>())
        };
        let edges = col(|o| o.edge_count as f64);
        let succ = col(|o| o.report.success_rate);
        let time = col(|o| o.report.avg_time_s);
        let veh = col(|o| o.report.vehicle_distance_km);
        let pkg = col(|o| o.report.package_distance_km);
        let part = col(|o| o.report.bundling_participation as f64);
        out.push_str(&format!(
            "{label},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            os.len(), edges.0, succ.0, succ.1, time.0, time.1, veh.0, veh.1, pkg.0, pkg.1, part.0, part.1
        ));
    }
    std::fs::write(path, out).map_err(|e| IoError::Io { path: path.display().to_string(), source: e })?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    SuccessVsTime,
    SuccessVsDistance,
    EdgesVsK,
}

impl std::str::FromStr for PlotKind {
    type Err = SweepError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success-vs-time" => Ok(PlotKind::SuccessVsTime),
            "success-vs-distance" => Ok(PlotKind::SuccessVsDistance),
            "edges-vs-k" => Ok(PlotKind::EdgesVsK),
            other => Err(SweepError::UnknownPlotKind(other.to_string())),
        }
    }
}

#[derive(Debug, Deserialize)]
struct AggregateRow {
    label: String,
    #[allow(dead_code)]
    backbone: String,
    k_trees: Option<u32>,
    #[allow(dead_code)]
    rho: Option<f64>,
    seed: u64,
    bundling: String,
    edge_count: f64,
    success_rate: f64,
    avg_time_s: f64,
    vehicle_distance_km: f64,
}

/// Extracts a plot-ready CSV from a sweep aggregate. Rows are averaged per
/// configuration (across seeds); for the two trade-off kinds the
/// Nash-bargaining row is flagged.
pub fn emit_plot_data(aggregate: &Path, kind: PlotKind, out: &Path) -> Result<(), SweepError> {
    let mut reader = csv::Reader::from_path(aggregate)
        .map_err(|e| IoError::Csv { path: aggregate.display().to_string(), source: e })?;
    let mut rows: Vec<AggregateRow> = Vec::new();
    for row in reader.deserialize::<AggregateRow>() {
        rows.push(row.map_err(|e| IoError::Csv { path: aggregate.display().to_string(), source: e })?);
    }
    // group label = cell label without its seed component
    let group_of = |row: &AggregateRow| row.label.replace(&format!("_s{}_", row.seed), "_");
    let mut groups: BTreeMap<String, Vec<&AggregateRow>> = BTreeMap::new();
    for row in &rows {
        groups.entry(group_of(row)).or_default().push(row);
    }

    let text = match kind {
        PlotKind::SuccessVsTime | PlotKind::SuccessVsDistance => {
            let bundled_only: BTreeMap<&String, &Vec<&AggregateRow>> =
                groups.iter().filter(|(_, rs)| rs[0].bundling == "on").collect();
            let points: Vec<TradeoffPoint> = bundled_only
                .iter()
                .map(|(label, rs)| TradeoffPoint {
                    label: (*label).clone(),
                    success_rate: mean_std(&rs.iter().map(|r| r.success_rate).collect::<Vec<_>>()).0,
                    avg_time_s: mean_std(&rs.iter().map(|r| r.avg_time_s).collect::<Vec<_>>()).0,
                    vehicle_distance_km: mean_std(&rs.iter().map(|r| r.vehicle_distance_km).collect::<Vec<_>>()).0,
                })
                .collect();
            let nbs = nash_bargaining_select(&points);
            let mut text = match kind {
                PlotKind::SuccessVsTime => String::from("label,success_rate,avg_time_s,is_nbs\n"),
                _ => String::from("label,success_rate,vehicle_distance_km,is_nbs\n"),
            };
            for (i, p) in points.iter().enumerate() {
                let value = match kind {
                    PlotKind::SuccessVsTime => p.avg_time_s,
                    _ => p.vehicle_distance_km,
                };
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    p.label,
                    p.success_rate,
                    value,
                    if Some(i) == nbs { "true" } else { "false" }
                ));
            }
            text
        }
        PlotKind::EdgesVsK => {
            let mut text = String::from("label,k_trees,edge_count\n");
            for (label, rs) in &groups {
                let edges = mean_std(&rs.iter().map(|r| r.edge_count).collect::<Vec<_>>()).0;
                let k = rs[0].k_trees.map(|k| k.to_string()).unwrap_or_default();
                text.push_str(&format!("{label},{k},{edges}\n"));
            }
            text
        }
    };
    std::fs::write(out, text).map_err(|e| IoError::Io { path: out.display().to_string(), source: e })?;
    Ok(())
}
