//! Reproducible delivery-request streams from a two-peak Gaussian arrival
//! process.
//!
//! Arrival intensity is evaluated in minutes (matching the sigma unit),
//! scaled to exact integer per-minute quotas by largest-remainder rounding,
//! and emitted as second-resolution pickup times. All draws come from a
//! single seeded ChaCha8 stream, so identical configs produce byte-identical
//! request lists.

use crate::graph::{distances_from, GraphError, HotspotGraph, NodeId, WeightKind};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload config: {0}")]
    InvalidConfig(String),
    #[error("dropoff {dropoff} unreachable from pickup {pickup}")]
    UnreachableDropoff { pickup: NodeId, dropoff: NodeId },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// How deadlines are derived from pickup times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeadlinePolicy {
    /// deadline = pickup + min(alpha * shortest_travel_time + beta_s, max_trip_s)
    ScaledShortestPath { alpha: f64, beta_s: f64 },
    /// deadline = pickup + budget_s
    FixedBudget { budget_s: f64 },
}

impl Default for DeadlinePolicy {
    fn default() -> Self {
        DeadlinePolicy::ScaledShortestPath { alpha: 2.0, beta_s: 600.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub horizon_s: f64,
    pub total_requests: u32,
    /// Peak centers as fractions of the horizon, strictly increasing.
    pub peak_fractions: Vec<f64>,
    /// Temporal spread of each peak, in minutes.
    pub sigma_min: f64,
    /// Trip-duration cap applied by the scaled deadline policy.
    pub max_trip_s: f64,
    pub deadline_policy: DeadlinePolicy,
    pub rng_seed: u64,
    /// Optional per-hotspot demand weights; uniform when absent.
    #[serde(default)]
    pub hotspot_weights: Option<Vec<f64>>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            horizon_s: 3600.0,
            total_requests: 9234,
            peak_fractions: vec![0.25, 0.75],
            sigma_min: 10.0,
            max_trip_s: 1800.0,
            deadline_policy: DeadlinePolicy::default(),
            rng_seed: 0,
            hotspot_weights: None,
        }
    }
}

impl WorkloadConfig {
    fn validate(&self, n_hotspots: usize) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidConfig(msg));
        if !(self.horizon_s > 0.0) {
            return bad(format!("horizon_s must be positive, got {}", self.horizon_s));
        }
        if self.total_requests < 1 {
            return bad("total_requests must be at least 1".into());
        }
        if self.peak_fractions.is_empty() {
            return bad("at least one peak fraction required".into());
        }
        for w in self.peak_fractions.windows(2) {
            if w[1] <= w[0] {
                return bad(format!("peak fractions must be strictly increasing: {w:?}"));
            }
        }
        if self.peak_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return bad(format!("peak fractions must lie in (0, 1): {:?}", self.peak_fractions));
        }
        if !(self.sigma_min > 0.0) {
            return bad(format!("sigma_min must be positive, got {}", self.sigma_min));
        }
        if !(self.max_trip_s > 0.0) {
            return bad(format!("max_trip_s must be positive, got {}", self.max_trip_s));
        }
        match &self.deadline_policy {
            DeadlinePolicy::ScaledShortestPath { alpha, beta_s } => {
                if *alpha < 1.0 || !alpha.is_finite() {
                    return bad(format!("deadline alpha must be at least 1, got {alpha}"));
                }
                if *beta_s < 0.0 || !beta_s.is_finite() {
                    return bad(format!("deadline beta_s must be nonnegative, got {beta_s}"));
                }
            }
            DeadlinePolicy::FixedBudget { budget_s } => {
                if !(budget_s > &0.0) {
                    return bad(format!("deadline budget_s must be positive, got {budget_s}"));
                }
            }
        }
        if let Some(weights) = &self.hotspot_weights {
            if weights.len() != n_hotspots {
                return bad(format!(
                    "hotspot_weights has {} entries for {} hotspots",
                    weights.len(),
                    n_hotspots
                ));
            }
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return bad("hotspot_weights must be finite and nonnegative".into());
            }
            if weights.iter().filter(|w| **w > 0.0).count() < 2 {
                return bad("hotspot_weights needs at least two positive entries".into());
            }
        }
        Ok(())
    }

    fn horizon_minutes(&self) -> usize {
        (self.horizon_s / 60.0).ceil() as usize
    }
}

/// One delivery request: pickup/dropoff hotspots plus its time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliveryRequest {
    pub id: u32,
    pub pickup: NodeId,
    pub dropoff: NodeId,
    pub earliest_pickup_s: f64,
    pub deadline_s: f64,
}

/// Arrival intensity at time `t_s` (seconds): a sum of Gaussian densities
/// evaluated in minutes, one per configured peak.
pub fn arrival_intensity(t_s: f64, cfg: &WorkloadConfig) -> f64 {
    let t_min = t_s / 60.0;
    let horizon_min = cfg.horizon_s / 60.0;
    let norm = 1.0 / (cfg.sigma_min * (2.0 * std::f64::consts::PI).sqrt());
    cfg.peak_fractions
        .iter()
        .map(|frac| {
            let mu = frac * horizon_min;
            let z = (t_min - mu) / cfg.sigma_min;
            norm * (-0.5 * z * z).exp()
        })
        .sum()
}

/// Integer request counts per minute, summing exactly to `total_requests`.
///
/// The intensity is sampled at minute starts (so peak minutes carry the
/// exact Gaussian maxima) and scaled by largest-remainder rounding: every
/// minute gets the floor of its exact share, and the leftover units go to
/// the largest fractional remainders (ties to the earlier minute). Quotas
/// depend only on the config, never on the seed.
pub fn per_minute_quotas(cfg: &WorkloadConfig) -> Vec<u32> {
    let minutes = cfg.horizon_minutes();
    let weights: Vec<f64> =
        (0..minutes).map(|m| arrival_intensity(m as f64 * 60.0, cfg)).collect();
    let total_weight: f64 = weights.iter().sum();
    let total = cfg.total_requests as u64;

    let mut quotas = vec![0u32; minutes];
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(minutes);
    let mut assigned: u64 = 0;
    for (m, w) in weights.iter().enumerate() {
        let exact = total as f64 * w / total_weight;
        let floor = exact.floor();
        quotas[m] = floor as u32;
        assigned += floor as u64;
        remainders.push((exact - floor, m));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut leftover = total - assigned;
    for (_, m) in remainders {
        if leftover == 0 {
            break;
        }
        quotas[m] += 1;
        leftover -= 1;
    }
    quotas
}

/// Deadline for a single request under `policy`, using travel-time shortest
/// paths on `g` (normally the complete graph).
pub fn assign_deadline(
    earliest_pickup_s: f64,
    pickup: NodeId,
    dropoff: NodeId,
    g: &HotspotGraph,
    policy: &DeadlinePolicy,
    max_trip_s: f64,
) -> Result<f64, WorkloadError> {
    let dist = distances_from(g, pickup, WeightKind::TravelTime)?;
    deadline_from_cache(earliest_pickup_s, pickup, dropoff, &dist, policy, max_trip_s)
}

fn deadline_from_cache(
    earliest_pickup_s: f64,
    pickup: NodeId,
    dropoff: NodeId,
    dist_from_pickup: &[f64],
    policy: &DeadlinePolicy,
    max_trip_s: f64,
) -> Result<f64, WorkloadError> {
    match policy {
        DeadlinePolicy::ScaledShortestPath { alpha, beta_s } => {
            let spt = dist_from_pickup[dropoff as usize];
            if spt.is_infinite() {
                return Err(WorkloadError::UnreachableDropoff { pickup, dropoff });
            }
            Ok(earliest_pickup_s + (alpha * spt + beta_s).min(max_trip_s))
        }
        DeadlinePolicy::FixedBudget { budget_s } => Ok(earliest_pickup_s + budget_s),
    }
}

/// Generates exactly `cfg.total_requests` requests, sorted by pickup time
/// with ids assigned in that order. Deterministic given the seed.
pub fn generate_requests(
    g: &HotspotGraph,
    cfg: &WorkloadConfig,
) -> Result<Vec<DeliveryRequest>, WorkloadError> {
    let n = g.node_count();
    if n < 2 {
        return Err(WorkloadError::InvalidConfig(format!("graph has {n} hotspots, need at least 2")));
    }
    cfg.validate(n)?;

    let quotas = per_minute_quotas(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let weighted = cfg
        .hotspot_weights
        .as_ref()
        .map(|w| WeightedIndex::new(w).expect("weights validated nonnegative with a positive sum"));

    struct Draft {
        pickup: NodeId,
        dropoff: NodeId,
        t_s: f64,
    }
    let mut drafts: Vec<Draft> = Vec::with_capacity(cfg.total_requests as usize);
    for (minute, &count) in quotas.iter().enumerate() {
        let slot_start = minute as f64 * 60.0;
        let slot_len = (cfg.horizon_s - slot_start).min(60.0);
        for _ in 0..count {
            let t_s = slot_start + rng.gen_range(0.0..slot_len);
            let pickup = match &weighted {
                Some(w) => w.sample(&mut rng) as NodeId,
                None => rng.gen_range(0..n) as NodeId,
            };
            let dropoff = loop {
                let d = match &weighted {
                    Some(w) => w.sample(&mut rng) as NodeId,
                    None => {
                        // uniform over the other n-1 hotspots, single draw
                        let d = rng.gen_range(0..n - 1) as NodeId;
                        break if d >= pickup { d + 1 } else { d };
                    }
                };
                if d != pickup {
                    break d;
                }
            };
            drafts.push(Draft { pickup, dropoff, t_s });
        }
    }
    drafts.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));

    // Deadlines need travel-time shortest paths from each pickup; cache one
    // Dijkstra per source.
    let mut dist_cache: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut requests = Vec::with_capacity(drafts.len());
    for (id, d) in drafts.into_iter().enumerate() {
        if dist_cache[d.pickup as usize].is_none() {
            dist_cache[d.pickup as usize] =
                Some(distances_from(g, d.pickup, WeightKind::TravelTime)?);
        }
        let dist = dist_cache[d.pickup as usize].as_ref().unwrap();
        let deadline_s = deadline_from_cache(
            d.t_s,
            d.pickup,
            d.dropoff,
            dist,
            &cfg.deadline_policy,
            cfg.max_trip_s,
        )?;
        requests.push(DeliveryRequest {
            id: id as u32,
            pickup: d.pickup,
            dropoff: d.dropoff,
            earliest_pickup_s: d.t_s,
            deadline_s,
        });
    }
    Ok(requests)
}
