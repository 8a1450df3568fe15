//! Versioned file formats: city and graph JSON, backbone JSON with edge
//! frequencies and provenance, request CSV, trace JSONL, and report JSON.
//!
//! Every JSON format carries a `format_version` field; loaders reject
//! unknown major versions. Loaders re-validate all structural invariants,
//! so a hand-edited file that violates them is rejected with a diagnostic
//! naming the offending entity (JSON syntax and type errors come with
//! line/column positions from the parser).

use crate::graph::{build_complete_graph, Edge, GraphError, HaversineProvider, Hotspot, HotspotGraph, NodeId};
use crate::metrics::SimReport;
use crate::sim::TraceEvent;
use crate::umst::{UmstBackbone, UmstConfig};
use crate::workload::DeliveryRequest;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: unsupported format_version '{found}' (supported major: 1)")]
    Version { path: String, found: String },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: {source}")]
    Graph { path: String, source: GraphError },
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.display().to_string(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), message: message.into() }
}

fn check_version(path: &Path, version: &str) -> Result<(), IoError> {
    let major = version.split('.').next().unwrap_or("");
    if major != "1" {
        return Err(IoError::Version { path: path.display().to_string(), found: version.to_string() });
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|source| IoError::Json { path: path.display().to_string(), source })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    u: NodeId,
    v: NodeId,
    distance_km: f64,
    travel_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    frequency: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    format_version: String,
    hotspots: Vec<Hotspot>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    edges: Option<Vec<EdgeRecord>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<UmstConfig>,
}

/// Writes hotspots only (a "city" file, no edges).
pub fn save_city(hotspots: &[Hotspot], path: &Path) -> Result<(), IoError> {
    write_json(
        path,
        &GraphFile {
            format_version: FORMAT_VERSION.to_string(),
            hotspots: hotspots.to_vec(),
            edges: None,
            provenance: None,
        },
    )
}

pub fn load_city(path: &Path) -> Result<Vec<Hotspot>, IoError> {
    let file: GraphFile = read_json(path)?;
    check_version(path, &file.format_version)?;
    // HotspotGraph::new validates the hotspot invariants
    let g = HotspotGraph::new(file.hotspots, Vec::new())
        .map_err(|source| IoError::Graph { path: path.display().to_string(), source })?;
    Ok(g.hotspots().to_vec())
}

pub fn save_graph(g: &HotspotGraph, path: &Path) -> Result<(), IoError> {
    let edges = g
        .edges()
        .iter()
        .map(|e| EdgeRecord {
            u: e.u,
            v: e.v,
            distance_km: e.distance_km,
            travel_time_s: e.travel_time_s,
            frequency: None,
        })
        .collect();
    write_json(
        path,
        &GraphFile {
            format_version: FORMAT_VERSION.to_string(),
            hotspots: g.hotspots().to_vec(),
            edges: Some(edges),
            provenance: None,
        },
    )
}

fn graph_from_file(path: &Path, file: GraphFile, speed_kmh: f64) -> Result<HotspotGraph, IoError> {
    check_version(path, &file.format_version)?;
    let to_graph_err = |source: GraphError| IoError::Graph { path: path.display().to_string(), source };
    match file.edges {
        None => build_complete_graph(file.hotspots, &HaversineProvider, speed_kmh).map_err(to_graph_err),
        Some(records) => {
            let edges = records
                .into_iter()
                .map(|r| Edge { u: r.u, v: r.v, distance_km: r.distance_km, travel_time_s: r.travel_time_s })
                .collect();
            HotspotGraph::new(file.hotspots, edges).map_err(to_graph_err)
        }
    }
}

/// Loads a graph file. City files (hotspots only) are completed into a
/// full graph at `speed_kmh` using haversine distances.
pub fn load_graph(path: &Path, speed_kmh: f64) -> Result<HotspotGraph, IoError> {
    let file: GraphFile = read_json(path)?;
    graph_from_file(path, file, speed_kmh)
}

/// Backbone serialization: the graph format extended with a per-edge
/// `frequency` count and the generating config echoed under `provenance`.
pub fn save_backbone(b: &UmstBackbone, path: &Path) -> Result<(), IoError> {
    let edges = b
        .graph()
        .edges()
        .iter()
        .map(|e| EdgeRecord {
            u: e.u,
            v: e.v,
            distance_km: e.distance_km,
            travel_time_s: e.travel_time_s,
            frequency: Some(b.frequency_of(e.u, e.v).expect("every union edge has a frequency")),
        })
        .collect();
    write_json(
        path,
        &GraphFile {
            format_version: FORMAT_VERSION.to_string(),
            hotspots: b.graph().hotspots().to_vec(),
            edges: Some(edges),
            provenance: Some(b.config().clone()),
        },
    )
}

pub fn load_backbone(path: &Path) -> Result<UmstBackbone, IoError> {
    let file: GraphFile = read_json(path)?;
    check_version(path, &file.format_version)?;
    let config = file
        .provenance
        .clone()
        .ok_or_else(|| format_err(path, "not a backbone file: missing provenance"))?;
    let records = match file.edges {
        Some(e) => e,
        None => return Err(format_err(path, "not a backbone file: missing edges")),
    };
    let mut frequency: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    let mut edges = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        let freq = r
            .frequency
            .ok_or_else(|| format_err(path, format!("edges[{i}]: missing frequency")))?;
        if freq < 1 || freq > config.k_trees {
            return Err(format_err(
                path,
                format!("edges[{i}]: frequency {freq} outside [1, {}]", config.k_trees),
            ));
        }
        let e = Edge::new(r.u, r.v, r.distance_km, r.travel_time_s);
        frequency.insert(e.key(), freq);
        edges.push(e);
    }
    let graph = HotspotGraph::new(file.hotspots, edges)
        .map_err(|source| IoError::Graph { path: path.display().to_string(), source })?;
    if !crate::graph::is_connected(&graph) {
        return Err(format_err(path, "backbone is not connected"));
    }
    Ok(UmstBackbone::from_parts(graph, frequency, config))
}

/// Loads whatever graph-shaped file lives at `path`: a backbone keeps only
/// its union edges, a plain graph keeps its edge list, a city file becomes
/// a complete graph at `speed_kmh`.
pub fn load_routing_graph(path: &Path, speed_kmh: f64) -> Result<HotspotGraph, IoError> {
    let file: GraphFile = read_json(path)?;
    graph_from_file(path, file, speed_kmh)
}

// ---------------------------------------------------------------------------
// Requests CSV
// ---------------------------------------------------------------------------

pub fn save_requests(requests: &[DeliveryRequest], path: &Path) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
    for r in requests {
        w.serialize(r).map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_requests(path: &Path) -> Result<Vec<DeliveryRequest>, IoError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
    let mut requests = Vec::new();
    for (i, row) in reader.deserialize::<DeliveryRequest>().enumerate() {
        let r = row.map_err(|source| IoError::Csv { path: path.display().to_string(), source })?;
        if r.pickup == r.dropoff {
            return Err(format_err(path, format!("row {i}: pickup equals dropoff ({})", r.pickup)));
        }
        if !(r.earliest_pickup_s < r.deadline_s) {
            return Err(format_err(
                path,
                format!("row {i}: earliest_pickup_s {} not before deadline_s {}", r.earliest_pickup_s, r.deadline_s),
            ));
        }
        requests.push(r);
    }
    Ok(requests)
}

// ---------------------------------------------------------------------------
// Trace JSONL
// ---------------------------------------------------------------------------

/// One JSON record per event, in simulation order.
pub fn save_trace_events(events: &[TraceEvent], path: &Path) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for ev in events {
        serde_json::to_writer(&mut w, ev)
            .map_err(|source| IoError::Json { path: path.display().to_string(), source })?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn load_trace_events(path: &Path) -> Result<Vec<TraceEvent>, IoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", i + 1)))?;
        events.push(ev);
    }
    Ok(events)
}

// ---------------------------------------------------------------------------
// Report JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ReportFile {
    format_version: String,
    #[serde(flatten)]
    report: SimReport,
}

pub fn save_report(report: &SimReport, path: &Path) -> Result<(), IoError> {
    write_json(path, &ReportFile { format_version: FORMAT_VERSION.to_string(), report: report.clone() })
}

pub fn load_report(path: &Path) -> Result<SimReport, IoError> {
    let file: ReportFile = read_json(path)?;
    check_version(path, &file.format_version)?;
    Ok(file.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightKind;
    use crate::sim::{run_simulation, FleetConfig, SimTrace};
    use crate::synth::{generate_synthetic_city, SyntheticCityConfig};
    use crate::umst::build_umst;
    use crate::workload::{generate_requests, WorkloadConfig};
    use tempfile::tempdir;

    fn sample_graph() -> HotspotGraph {
        let city = generate_synthetic_city(&SyntheticCityConfig {
            n_hotspots: 10,
            rng_seed: 5,
            ..SyntheticCityConfig::default()
        })
        .unwrap();
        build_complete_graph(city, &HaversineProvider, 30.0).unwrap()
    }

    #[test]
    fn city_and_graph_round_trip() {
        let dir = tempdir().unwrap();
        let g = sample_graph();

        let city_path = dir.path().join("city.json");
        save_city(g.hotspots(), &city_path).unwrap();
        let city = load_city(&city_path).unwrap();
        assert_eq!(city, g.hotspots());

        let graph_path = dir.path().join("graph.json");
        save_graph(&g, &graph_path).unwrap();
        let loaded = load_graph(&graph_path, 30.0).unwrap();
        assert_eq!(loaded.hotspots(), g.hotspots());
        assert_eq!(loaded.edges(), g.edges());

        // a city file loads as a complete graph at the given speed
        let completed = load_graph(&city_path, 30.0).unwrap();
        assert_eq!(completed.edge_count(), 45);
        assert_eq!(completed.edges(), g.edges());
    }

    #[test]
    fn backbone_round_trip_preserves_everything() {
        let dir = tempdir().unwrap();
        let g = sample_graph();
        let b = build_umst(&g, &UmstConfig { rng_seed: 3, ..UmstConfig::default() }).unwrap();
        let path = dir.path().join("backbone.json");
        save_backbone(&b, &path).unwrap();
        let loaded = load_backbone(&path).unwrap();
        assert_eq!(loaded.graph().edges(), b.graph().edges());
        assert_eq!(loaded.edge_frequency(), b.edge_frequency());
        assert_eq!(loaded.config(), b.config());

        // byte-exact reserialization
        let again = dir.path().join("backbone2.json");
        save_backbone(&loaded, &again).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());

        // the routing loader accepts backbone files too
        let routing = load_routing_graph(&path, 30.0).unwrap();
        assert_eq!(routing.edges(), b.graph().edges());
    }

    #[test]
    fn version_and_invariant_rejection() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.json");

        std::fs::write(&path, r#"{"format_version":"2.0","hotspots":[]}"#).unwrap();
        assert!(matches!(load_city(&path), Err(IoError::Version { .. })));

        std::fs::write(
            &path,
            r#"{"format_version":"1.0","hotspots":[
                {"id":0,"lat":99.0,"lon":0.0,"tract_label":"a"},
                {"id":1,"lat":0.0,"lon":0.0,"tract_label":"b"}]}"#,
        )
        .unwrap();
        let err = load_city(&path).unwrap_err();
        assert!(err.to_string().contains("latitude"), "{err}");

        // duplicate edge named in the diagnostic
        std::fs::write(
            &path,
            r#"{"format_version":"1.0","hotspots":[
                {"id":0,"lat":1.0,"lon":0.0,"tract_label":"a"},
                {"id":1,"lat":0.0,"lon":0.0,"tract_label":"b"}],
                "edges":[
                {"u":0,"v":1,"distance_km":1.0,"travel_time_s":60.0},
                {"u":1,"v":0,"distance_km":1.0,"travel_time_s":60.0}]}"#,
        )
        .unwrap();
        let err = load_graph(&path, 30.0).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        // JSON syntax errors carry line positions
        std::fs::write(&path, "{\n  \"format_version\": \"1.0\",\n  oops\n}").unwrap();
        let err = load_city(&path).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn backbone_frequency_bounds_checked() {
        let dir = tempdir().unwrap();
        let g = sample_graph();
        let b = build_umst(&g, &UmstConfig { rng_seed: 3, ..UmstConfig::default() }).unwrap();
        let path = dir.path().join("backbone.json");
        save_backbone(&b, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        let k = b.config().k_trees;
        text = text.replacen(&format!("\"frequency\": {}", b.graph().edges()[0].u), "", 0); // no-op guard
        let needle = "\"frequency\":";
        let pos = text.find(needle).unwrap();
        let end = text[pos..].find(['\n', ','].as_ref()).unwrap() + pos;
        text.replace_range(pos..end, &format!("\"frequency\": {}", k + 1));
        std::fs::write(&path, text).unwrap();
        let err = load_backbone(&path).unwrap_err();
        assert!(err.to_string().contains("frequency"), "{err}");
    }

    #[test]
    fn requests_round_trip_and_validation() {
        let dir = tempdir().unwrap();
        let g = sample_graph();
        let requests = generate_requests(
            &g,
            &WorkloadConfig { total_requests: 50, rng_seed: 1, ..WorkloadConfig::default() },
        )
        .unwrap();
        let path = dir.path().join("requests.csv");
        save_requests(&requests, &path).unwrap();
        let loaded = load_requests(&path).unwrap();
        assert_eq!(loaded, requests);

        let header = "id,pickup,dropoff,earliest_pickup_s,deadline_s\n";
        std::fs::write(&path, format!("{header}0,3,3,10.0,100.0\n")).unwrap();
        assert!(load_requests(&path).unwrap_err().to_string().contains("pickup equals dropoff"));
        std::fs::write(&path, format!("{header}0,1,2,100.0,50.0\n")).unwrap();
        assert!(load_requests(&path).unwrap_err().to_string().contains("not before"));
    }

    #[test]
    fn trace_and_report_round_trip() {
        let dir = tempdir().unwrap();
        let g = sample_graph();
        let requests = generate_requests(
            &g,
            &WorkloadConfig { total_requests: 60, rng_seed: 2, ..WorkloadConfig::default() },
        )
        .unwrap();
        let fleet = FleetConfig::default();
        let trace = run_simulation(&g, &requests, &fleet, 9).unwrap();

        let path = dir.path().join("trace.jsonl");
        save_trace_events(&trace.events, &path).unwrap();
        let events = load_trace_events(&path).unwrap();
        assert_eq!(events, trace.events);
        let rebuilt = SimTrace::from_events(events, &requests, fleet.vehicle_capacity, true, 9).unwrap();
        assert_eq!(rebuilt.outcomes, trace.outcomes);

        let validation = crate::sim::validate_trace(&trace, &g, &requests);
        let mut report = crate::metrics::compute_metrics(&trace, &requests, &validation).unwrap();
        report.label = "roundtrip".into();
        let rp = dir.path().join("report.json");
        save_report(&report, &rp).unwrap();
        assert_eq!(load_report(&rp).unwrap(), report);
    }

    #[test]
    fn routing_graph_rejects_disconnected_backbone_files() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("disc.json");
        std::fs::write(
            &path,
            r#"{"format_version":"1.0","hotspots":[
                {"id":0,"lat":1.0,"lon":0.0,"tract_label":"a"},
                {"id":1,"lat":0.0,"lon":0.0,"tract_label":"b"},
                {"id":2,"lat":0.5,"lon":0.5,"tract_label":"c"}],
                "edges":[{"u":0,"v":1,"distance_km":1.0,"travel_time_s":60.0,"frequency":1}],
                "provenance":{"k_trees":1,"drop_rate":0.0,"rng_seed":0,"max_resample_attempts":100,"mst_weight":"distance"}}"#,
        )
        .unwrap();
        let err = load_backbone(&path).unwrap_err();
        assert!(err.to_string().contains("not connected"), "{err}");
        let _ = WeightKind::Distance;
    }
}
