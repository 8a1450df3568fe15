//! Sparse, redundant delivery backbones built from unions of minimum
//! spanning trees, plus a deterministic discrete-event delivery simulator
//! with opportunistic order bundling.
//!
//! The crate is organized around the pipeline an experiment follows:
//!
//! 1. [`synth`] / [`graph`] — obtain hotspots and build the complete
//!    weighted hotspot graph.
//! 2. [`umst`] — sample K randomly perturbed minimum spanning trees and
//!    take their union to form a sparse backbone with per-edge frequency
//!    counts, frequency tiers, stretch profiling, and next-hop routing.
//! 3. [`workload`] — generate a reproducible delivery-request stream from
//!    a two-peak Gaussian arrival process.
//! 4. [`sim`] — run the deterministic event-driven delivery simulation
//!    with opportunistic bundling and bundle merging.
//! 5. [`metrics`] — compute evaluation metrics, comparison tables,
//!    Pareto frontiers, and the Nash-bargaining balanced configuration.
//! 6. [`io`] / [`sweep`] — file formats and resumable experiment sweeps.

pub mod graph;
pub mod io;
pub mod metrics;
pub mod sim;
pub mod sweep;
pub mod synth;
pub mod umst;
pub mod workload;

pub use metrics::{SimReport, TradeoffPoint};
pub use sim::{FleetConfig, SimTrace, SpawnMode};
pub use graph::{Edge, GraphError, Hotspot, HotspotGraph, NodeId, Path, WeightKind};


pub use umst::{FrequencyTier, NextHopTable, UmstBackbone, UmstConfig};
pub use workload::{DeadlinePolicy, DeliveryRequest, WorkloadConfig};
