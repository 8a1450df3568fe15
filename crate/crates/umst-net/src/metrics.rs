//! Evaluation metrics over simulation traces, comparison tables across
//! backbones, Pareto frontiers, and Nash-bargaining configuration selection.

use crate::sim::{SimTrace, ValidationReport};
use crate::workload::DeliveryRequest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("trace failed validation with {violations} violation(s); refusing to report")]
    ValidationRequired { violations: usize },
    #[error("reports cover different workloads: {0}")]
    WorkloadMismatch(String),
    #[error("comparison needs at least 2 reports, got {0}")]
    NotEnoughReports(usize),
}

/// Aggregate metrics of one simulation run.
///
/// Time metrics are measured from a request's earliest pickup to its
/// dropoff and averaged over successful deliveries only; delay metrics
/// (dropoff minus deadline, negative = early) cover all completed
/// deliveries. `distance_saved_vs_baseline_km` is the paired definition
/// (baseline vehicle distance minus this run's) and is only present when a
/// baseline was applied; `package_minus_vehicle_km` is the structural
/// definition and always reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub label: String,
    pub workload_id: String,
    pub total_deliveries: u32,
    pub completed: u32,
    pub successful: u32,
    pub success_rate: f64,
    pub completion_rate: f64,
    pub avg_time_s: f64,
    pub median_time_s: f64,
    pub vehicle_distance_km: f64,
    pub package_distance_km: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance_saved_vs_baseline_km: Option<f64>,
    pub package_minus_vehicle_km: f64,
    pub bundling_participation: u32,
    pub bundles_created: u32,
    pub avg_delay_s: f64,
    pub median_delay_s: f64,
    pub max_delay_s: f64,
}

impl SimReport {
    /// Records the paired distance-saved definition: the baseline's vehicle
    /// distance (normally the matching no-bundling run) minus this run's.
    pub fn apply_baseline(&mut self, baseline: &SimReport) -> Result<(), ReportError> {
        if baseline.workload_id != self.workload_id {
            return Err(ReportError::WorkloadMismatch(format!(
                "{} vs {}",
                baseline.workload_id, self.workload_id
            )));
        }
        self.distance_saved_vs_baseline_km =
            Some(baseline.vehicle_distance_km - self.vehicle_distance_km);
        Ok(())
    }
}

/// Stable fingerprint of a request list, used to refuse comparisons across
/// different workloads. FNV-1a over the raw request fields.
pub fn workload_fingerprint(requests: &[DeliveryRequest]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(requests.len() as u64).to_le_bytes());
    for r in requests {
        eat(&r.id.to_le_bytes());
        eat(&r.pickup.to_le_bytes());
        eat(&r.dropoff.to_le_bytes());
        eat(&r.earliest_pickup_s.to_bits().to_le_bytes());
        eat(&r.deadline_s.to_bits().to_le_bytes());
    }
    format!("{hash:016x}")
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// Computes the evaluation metrics from a validated trace.
///
/// Refuses to report on traces whose validation found violations.
pub fn compute_metrics(
    trace: &SimTrace,
    requests: &[DeliveryRequest],
    validation: &ValidationReport,
) -> Result<SimReport, ReportError> {
    if !validation.is_clean() {
        return Err(ReportError::ValidationRequired { violations: validation.violations.len() });
    }
    let by_id: BTreeMap<u32, &DeliveryRequest> = requests.iter().map(|r| (r.id, r)).collect();
    let total = requests.len() as u32;

    let mut completed = 0u32;
    let mut successful = 0u32;
    let mut times = Vec::new();
    let mut delays = Vec::new();
    for o in &trace.outcomes {
        if !o.completed {
            continue;
        }
        completed += 1;
        let r = by_id[&o.request_id];
        let delivered = o.delivered_time_s.expect("completed outcomes carry delivery times");
        delays.push(delivered - r.deadline_s);
        if o.success {
            successful += 1;
            times.push(delivered - r.earliest_pickup_s);
        }
    }
    times.sort_by(f64::total_cmp);
    delays.sort_by(f64::total_cmp);

    // vehicle and package distance accumulate in the same traversal order,
    // so a bundling-free run yields bit-identical values
    let mut vehicle_km = 0.0;
    let mut package_km = 0.0;
    let mut shared: BTreeMap<u32, bool> =
        trace.outcomes.iter().map(|o| (o.request_id, false)).collect();
    let mut bundles_created = 0u32;
    for v in &trace.vehicles {
        let mut was_multi = false;
        for (dist, load) in v.leg_distance_km.iter().zip(&v.leg_loads) {
            vehicle_km += dist;
            for id in load {
                package_km += dist;
                if load.len() > 1 {
                    shared.insert(*id, true);
                }
            }
            let multi = load.len() > 1;
            if multi && !was_multi {
                bundles_created += 1;
            }
            was_multi = multi;
        }
    }
    let bundling_participation = shared.values().filter(|&&s| s).count() as u32;

    let avg = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(SimReport {
        label: String::new(),
        workload_id: workload_fingerprint(requests),
        total_deliveries: total,
        completed,
        successful,
        success_rate: successful as f64 / total as f64,
        completion_rate: completed as f64 / total as f64,
        avg_time_s: avg(&times),
        median_time_s: median(&times),
        vehicle_distance_km: vehicle_km,
        package_distance_km: package_km,
        distance_saved_vs_baseline_km: None,
        package_minus_vehicle_km: package_km - vehicle_km,
        bundling_participation,
        bundles_created,
        avg_delay_s: avg(&delays),
        median_delay_s: median(&delays),
        max_delay_s: delays.last().copied().unwrap_or(0.0),
    })
}

/// Mean and sample standard deviation of one metric for one label group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub higher_is_better: bool,
    pub by_label: Vec<MetricSummary>,
}

/// Side-by-side comparison of grouped reports with per-metric best marking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub labels: Vec<String>,
    pub runs_per_label: Vec<usize>,
    pub metrics: Vec<MetricComparison>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,direction");
        for label in &self.labels {
            out.push_str(&format!(",{label}_mean,{label}_std,{label}_best"));
        }
        out.push('\n');
        for m in &self.metrics {
            out.push_str(&format!("{},{}", m.metric, if m.higher_is_better { "up" } else { "down" }));
            for s in &m.by_label {
                out.push_str(&format!(",{},{},{}", s.mean, s.std, s.best));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Groups reports by label, checks they cover matching workload sets, and
/// produces per-metric mean ± std with best-value marking.
pub fn compare_backbones(reports: &[SimReport]) -> Result<ComparisonTable, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::NotEnoughReports(reports.len()));
    }
    let mut groups: BTreeMap<&str, Vec<&SimReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(&r.label).or_default().push(r);
    }
    // each label must have been evaluated on the same multiset of workloads
    let mut reference: Option<(&str, Vec<&str>)> = None;
    for (label, rs) in &groups {
        let mut ids: Vec<&str> = rs.iter().map(|r| r.workload_id.as_str()).collect();
        ids.sort_unstable();
        match &reference {
            None => reference = Some((label, ids)),
            Some((ref_label, ref_ids)) => {
                if *ref_ids != ids {
                    return Err(ReportError::WorkloadMismatch(format!(
                        "label '{label}' ran on different workloads than '{ref_label}'"
                    )));
                }
            }
        }
    }

    let labels: Vec<String> = groups.keys().map(|s| s.to_string()).collect();
    let runs_per_label: Vec<usize> = groups.values().map(Vec::len).collect();
    let extractors: [(&str, bool, fn(&SimReport) -> f64); 8] = [
        ("success_rate", true, |r| r.success_rate),
        ("completion_rate", true, |r| r.completion_rate),
        ("avg_time_s", false, |r| r.avg_time_s),
        ("median_time_s", false, |r| r.median_time_s),
        ("vehicle_distance_km", false, |r| r.vehicle_distance_km),
        ("package_distance_km", false, |r| r.package_distance_km),
        ("distance_saved_km", true, |r| {
            r.distance_saved_vs_baseline_km.unwrap_or(r.package_minus_vehicle_km)
        }),
        ("bundling_participation", true, |r| r.bundling_participation as f64),
    ];
    let mut metrics = Vec::with_capacity(extractors.len());
    for (name, higher, get) in extractors {
        let stats: Vec<(f64, f64)> = groups
            .values()
            .map(|rs| mean_std(&rs.iter().map(|r| get(r)).collect::<Vec<_>>()))
            .collect();
        let best_value = stats
            .iter()
            .map(|(m, _)| *m)
            .fold(if higher { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, m| {
                if higher {
                    acc.max(m)
                } else {
                    acc.min(m)
                }
            });
        metrics.push(MetricComparison {
            metric: name.to_string(),
            higher_is_better: higher,
            by_label: stats
                .into_iter()
                .map(|(mean, std)| MetricSummary { mean, std, best: mean == best_value })
                .collect(),
        });
    }
    Ok(ComparisonTable { labels, runs_per_label, metrics })
}

/// One configuration's position in the success/time/distance trade-off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub label: String,
    pub success_rate: f64,
    pub avg_time_s: f64,
    pub vehicle_distance_km: f64,
}

impl TradeoffPoint {
    pub fn from_report(r: &SimReport) -> Self {
        Self {
            label: r.label.clone(),
            success_rate: r.success_rate,
            avg_time_s: r.avg_time_s,
            vehicle_distance_km: r.vehicle_distance_km,
        }
    }
}

/// Selects the balanced configuration by the Nash-bargaining rule: min-max
/// normalize success (ascending) and average time (descending) over the
/// point set, then maximize the product of the two utilities against the
/// post-normalization disagreement point (0, 0). Ties break toward higher
/// raw success rate, then label order. Returns an index into `points`.
pub fn nash_bargaining_select(points: &[TradeoffPoint]) -> Option<usize> {
    if points.is_empty() {
        return None;
    }
    let fold_min =
        |get: fn(&TradeoffPoint) -> f64| points.iter().map(get).fold(f64::INFINITY, f64::min);
    let fold_max =
        |get: fn(&TradeoffPoint) -> f64| points.iter().map(get).fold(f64::NEG_INFINITY, f64::max);
    let (s_min, s_max) = (fold_min(|p| p.success_rate), fold_max(|p| p.success_rate));
    let (t_min, t_max) = (fold_min(|p| p.avg_time_s), fold_max(|p| p.avg_time_s));
    // a degenerate dimension carries no preference; give everyone full utility
    let u_succ = |s: f64| if s_max > s_min { (s - s_min) / (s_max - s_min) } else { 1.0 };
    let u_time = |t: f64| if t_max > t_min { (t_max - t) / (t_max - t_min) } else { 1.0 };

    let mut best: Option<usize> = None;
    let mut best_product = f64::NEG_INFINITY;
    for (i, p) in points.iter().enumerate() {
        let product = u_succ(p.success_rate) * u_time(p.avg_time_s);
        let better = match best {
            None => true,
            Some(b) => {
                product > best_product
                    || (product == best_product
                        && (p.success_rate > points[b].success_rate
                            || (p.success_rate == points[b].success_rate
                                && p.label < points[b].label)))
            }
        };
        if better {
            best = Some(i);
            best_product = product;
        }
    }
    best
}

/// Which second objective the frontier minimizes alongside maximal success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierObjective {
    SuccessVsTime,
    SuccessVsDistance,
}

impl FrontierObjective {
    fn value(&self, p: &TradeoffPoint) -> f64 {
        match self {
            FrontierObjective::SuccessVsTime => p.avg_time_s,
            FrontierObjective::SuccessVsDistance => p.vehicle_distance_km,
        }
    }
}

/// Pareto-nondominated subset under (maximize success, minimize objective),
/// returned as indices into `points` sorted by ascending success rate.
pub fn tradeoff_frontier(points: &[TradeoffPoint], objective: FrontierObjective) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b]
            .success_rate
            .total_cmp(&points[a].success_rate)
            .then_with(|| objective.value(&points[a]).total_cmp(&objective.value(&points[b])))
            .then_with(|| a.cmp(&b))
    });
    let mut frontier = Vec::new();
    let mut best_obj = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        // one group of equal success at a time, descending
        let s = points[order[i]].success_rate;
        let mut j = i;
        while j < order.len() && points[order[j]].success_rate == s {
            j += 1;
        }
        let group_min = objective.value(&points[order[i]]);
        if group_min < best_obj {
            for &idx in &order[i..j] {
                if objective.value(&points[idx]) == group_min {
                    frontier.push(idx);
                }
            }
            best_obj = group_min;
        }
        i = j;
    }
    frontier.sort_by(|&a, &b| {
        points[a]
            .success_rate
            .total_cmp(&points[b].success_rate)
            .then_with(|| objective.value(&points[a]).total_cmp(&objective.value(&points[b])))
            .then_with(|| a.cmp(&b))
    });
    frontier
}
