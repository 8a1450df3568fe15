//! Weighted hotspot graphs: construction, MST, shortest paths, connectivity.
//!
//! Everything downstream (backbone sampling, routing, simulation) builds on
//! the [`HotspotGraph`] defined here. Graphs are immutable after
//! construction and safe to share read-only across threads; all operations
//! are pure functions of their inputs.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// Node identifier. Ids are contiguous from 0 within a graph.
pub type NodeId = u32;

/// Mean Earth radius in kilometres, used by [`haversine_distance`].
pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("need at least {min} hotspots, got {got}")]
    TooFewHotspots { min: usize, got: usize },
    #[error("hotspot at index {index}: expected id {index}, found {found} (ids must be contiguous from 0)")]
    NonContiguousId { index: usize, found: NodeId },
    #[error("hotspot {id}: latitude {lat} outside [-90, 90]")]
    LatitudeOutOfRange { id: NodeId, lat: f64 },
    #[error("hotspot {id}: longitude {lon} outside [-180, 180]")]
    LongitudeOutOfRange { id: NodeId, lon: f64 },
    #[error("edge ({u}, {v}): self-loops are not allowed")]
    SelfLoop { u: NodeId, v: NodeId },
    #[error("edge ({u}, {v}): endpoint does not exist (graph has {nodes} hotspots)")]
    UnknownEndpoint { u: NodeId, v: NodeId, nodes: usize },
    #[error("edge ({u}, {v}): duplicate of an existing edge")]
    DuplicateEdge { u: NodeId, v: NodeId },
    #[error("edge ({u}, {v}): distance_km {distance_km} must be finite and nonnegative")]
    InvalidDistance { u: NodeId, v: NodeId, distance_km: f64 },
    #[error("edge ({u}, {v}): travel_time_s {travel_time_s} must be finite and positive")]
    InvalidTravelTime { u: NodeId, v: NodeId, travel_time_s: f64 },
    #[error("speed_kmh must be positive, got {0}")]
    NonPositiveSpeed(f64),
    #[error("graph is disconnected: node {unreachable} is unreachable from node 0")]
    Disconnected { unreachable: NodeId },
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("no path from {src} to {dst}")]
    Unreachable { src: NodeId, dst: NodeId },
}

/// A hotspot node: the representative point of one census tract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub tract_label: String,
}

impl Hotspot {
    pub fn new(id: NodeId, lat: f64, lon: f64, tract_label: impl Into<String>) -> Self {
        Self { id, lat, lon, tract_label: tract_label.into() }
    }
}

/// Undirected weighted edge, stored canonically with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub distance_km: f64,
    pub travel_time_s: f64,
}

impl Edge {
    /// Builds an edge in canonical orientation regardless of argument order.
    pub fn new(u: NodeId, v: NodeId, distance_km: f64, travel_time_s: f64) -> Self {
        let (u, v) = if u < v { (u, v) } else { (v, u) };
        Self { u, v, distance_km, travel_time_s }
    }

    pub fn weight(&self, kind: WeightKind) -> f64 {
        match kind {
            WeightKind::Distance => self.distance_km,
            WeightKind::TravelTime => self.travel_time_s,
        }
    }

    pub fn key(&self) -> (NodeId, NodeId) {
        (self.u, self.v)
    }
}

/// Which per-edge weight an algorithm should optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Distance,
    TravelTime,
}

/// A shortest path: node sequence plus total cost under the chosen weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub cost: f64,
}

/// Supplies pairwise distances during graph construction.
///
/// The shipped default is [`HaversineProvider`]. External routing backends
/// (road-network APIs) can implement this trait; none are bundled so the
/// crate stays self-contained and test-deterministic.
pub trait DistanceProvider {
    fn distance_km(&self, a: &Hotspot, b: &Hotspot) -> f64;
}

/// Great-circle distances on a spherical Earth.
#[derive(Debug, Clone, Copy, Default)]
pub struct HaversineProvider;

impl DistanceProvider for HaversineProvider {
    fn distance_km(&self, a: &Hotspot, b: &Hotspot) -> f64 {
        haversine_distance(a, b)
    }
}

/// Great-circle distance between two hotspots in kilometres.
pub fn haversine_distance(a: &Hotspot, b: &Hotspot) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Weighted undirected graph over hotspot nodes.
///
/// Invariants enforced at construction: hotspot ids contiguous from 0,
/// coordinates in range, edges canonical (`u < v`), no self-loops, no
/// parallel edges, finite nonnegative distances, finite positive travel
/// times.
#[derive(Debug, Clone)]
pub struct HotspotGraph {
    hotspots: Vec<Hotspot>,
    edges: Vec<Edge>,
    /// adjacency[u] = sorted list of (neighbor, index into edges)
    adjacency: Vec<Vec<(NodeId, u32)>>,
}

impl HotspotGraph {
    pub fn new(hotspots: Vec<Hotspot>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if hotspots.is_empty() {
            return Err(GraphError::TooFewHotspots { min: 1, got: 0 });
        }
        for (index, h) in hotspots.iter().enumerate() {
            if h.id as usize != index {
                return Err(GraphError::NonContiguousId { index, found: h.id });
            }
            if !(-90.0..=90.0).contains(&h.lat) || !h.lat.is_finite() {
                return Err(GraphError::LatitudeOutOfRange { id: h.id, lat: h.lat });
            }
            if !(-180.0..=180.0).contains(&h.lon) || !h.lon.is_finite() {
                return Err(GraphError::LongitudeOutOfRange { id: h.id, lon: h.lon });
            }
        }
        let n = hotspots.len();
        let mut graph = Self { hotspots, edges: Vec::with_capacity(edges.len()), adjacency: vec![Vec::new(); n] };
        for e in edges {
            graph.insert_edge(e)?;
        }
        for adj in &mut graph.adjacency {
            adj.sort_unstable_by_key(|&(v, _)| v);
        }
        Ok(graph)
    }

    fn insert_edge(&mut self, e: Edge) -> Result<(), GraphError> {
        let n = self.hotspots.len();
        if e.u == e.v {
            return Err(GraphError::SelfLoop { u: e.u, v: e.v });
        }
        let e = Edge::new(e.u, e.v, e.distance_km, e.travel_time_s);
        if (e.v as usize) >= n {
            return Err(GraphError::UnknownEndpoint { u: e.u, v: e.v, nodes: n });
        }
        if !e.distance_km.is_finite() || e.distance_km < 0.0 {
            return Err(GraphError::InvalidDistance { u: e.u, v: e.v, distance_km: e.distance_km });
        }
        if !e.travel_time_s.is_finite() || e.travel_time_s <= 0.0 {
            return Err(GraphError::InvalidTravelTime { u: e.u, v: e.v, travel_time_s: e.travel_time_s });
        }
        if self.adjacency[e.u as usize].iter().any(|&(v, _)| v == e.v) {
            return Err(GraphError::DuplicateEdge { u: e.u, v: e.v });
        }
        let idx = self.edges.len() as u32;
        self.adjacency[e.u as usize].push((e.v, idx));
        self.adjacency[e.v as usize].push((e.u, idx));
        self.edges.push(e);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.hotspots.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn hotspots(&self) -> &[Hotspot] {
        &self.hotspots
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn hotspot(&self, id: NodeId) -> Result<&Hotspot, GraphError> {
        self.hotspots.get(id as usize).ok_or(GraphError::UnknownNode(id))
    }

    /// Neighbors of `u` with the connecting edge, in ascending neighbor order.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = (NodeId, &Edge)> + '_ {
        self.adjacency[u as usize].iter().map(move |&(v, idx)| (v, &self.edges[idx as usize]))
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<&Edge> {
        self.adjacency
            .get(u as usize)?
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, idx)| &self.edges[idx as usize])
    }

    /// Same hotspots, different edge set. Used when restricting to a backbone.
    pub fn with_edges(&self, edges: Vec<Edge>) -> Result<Self, GraphError> {
        Self::new(self.hotspots.clone(), edges)
    }
}

/// Builds the complete graph over `hotspots`: one edge per unordered pair,
/// distances from `provider`, travel times at a constant fleet speed.
pub fn build_complete_graph(
    hotspots: Vec<Hotspot>,
    provider: &dyn DistanceProvider,
    speed_kmh: f64,
) -> Result<HotspotGraph, GraphError> {
    if hotspots.len() < 2 {
        return Err(GraphError::TooFewHotspots { min: 2, got: hotspots.len() });
    }
    if !(speed_kmh > 0.0) || !speed_kmh.is_finite() {
        return Err(GraphError::NonPositiveSpeed(speed_kmh));
    }
    let n = hotspots.len();
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let distance_km = provider.distance_km(&hotspots[u], &hotspots[v]);
            // Zero-distance pairs (coincident coordinates) still need a
            // positive travel time; floor at one millisecond.
            let travel_time_s = (distance_km / speed_kmh * 3600.0).max(1e-3);
            edges.push(Edge::new(u as NodeId, v as NodeId, distance_km, travel_time_s));
        }
    }
    HotspotGraph::new(hotspots, edges)
}

/// True iff the graph has a single connected component.
pub fn is_connected(g: &HotspotGraph) -> bool {
    first_unreachable(g).is_none()
}

/// Smallest node id unreachable from node 0, if any.
fn first_unreachable(g: &HotspotGraph) -> Option<NodeId> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut stack = vec![0 as NodeId];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for (v, _) in g.neighbors(u) {
            if !seen[v as usize] {
                seen[v as usize] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().position(|&s| !s).map(|i| i as NodeId)
}

/// Union-find with path compression and union by rank.
struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        let mut cur = x;
        while self.parent[cur as usize] != root {
            let next = self.parent[cur as usize];
            self.parent[cur as usize] = root;
            cur = next;
        }
        root
    }

    /// Returns false if x and y were already in the same set.
    fn union(&mut self, x: u32, y: u32) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        match self.rank[rx as usize].cmp(&self.rank[ry as usize]) {
            Ordering::Less => self.parent[rx as usize] = ry,
            Ordering::Greater => self.parent[ry as usize] = rx,
            Ordering::Equal => {
                self.parent[ry as usize] = rx;
                self.rank[rx as usize] += 1;
            }
        }
        true
    }
}

/// Kruskal over a raw edge list; `None` when the edges do not span `n` nodes.
/// Ties broken by (weight, u, v). Result sorted by canonical (u, v).
pub(crate) fn kruskal_over(n: usize, edges: &[Edge], weight: WeightKind) -> Option<Vec<Edge>> {
    let mut order: Vec<u32> = (0..edges.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let ea = &edges[a as usize];
        let eb = &edges[b as usize];
        ea.weight(weight)
            .total_cmp(&eb.weight(weight))
            .then_with(|| ea.u.cmp(&eb.u))
            .then_with(|| ea.v.cmp(&eb.v))
    });
    let mut uf = UnionFind::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for idx in order {
        let e = edges[idx as usize];
        if uf.union(e.u, e.v) {
            tree.push(e);
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    if tree.len() != n - 1 {
        return None;
    }
    tree.sort_unstable_by_key(Edge::key);
    Some(tree)
}

/// Kruskal MST with deterministic tie-breaking by (weight, u, v).
///
/// Returns exactly n-1 edges in canonical (u, v) order, or a
/// [`GraphError::Disconnected`] naming an unreachable node.
pub fn minimum_spanning_tree(g: &HotspotGraph, weight: WeightKind) -> Result<Vec<Edge>, GraphError> {
    kruskal_over(g.node_count(), g.edges(), weight).ok_or_else(|| {
        let unreachable = first_unreachable(g).expect("failed kruskal implies a disconnected node");
        GraphError::Disconnected { unreachable }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the cheapest
        // entry first, smaller node id first on equal cost.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra distances from `src` to every node; `f64::INFINITY` when unreachable.
pub fn distances_from(g: &HotspotGraph, src: NodeId, weight: WeightKind) -> Result<Vec<f64>, GraphError> {
    if src as usize >= g.node_count() {
        return Err(GraphError::UnknownNode(src));
    }
    let mut dist = vec![f64::INFINITY; g.node_count()];
    dist[src as usize] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { cost: 0.0, node: src });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node as usize] {
            continue;
        }
        for (v, e) in g.neighbors(node) {
            let next = cost + e.weight(weight);
            if next < dist[v as usize] {
                dist[v as usize] = next;
                heap.push(HeapEntry { cost: next, node: v });
            }
        }
    }
    Ok(dist)
}

/// Minimum-cost path from `src` to `dst` under the chosen weight.
///
/// Ties between equal-cost shortest paths are broken deterministically in
/// favor of the lexicographically smallest node sequence: the path is
/// reconstructed by walking from `src`, always taking the smallest-id
/// neighbor that stays on a minimum-cost route to `dst`.
pub fn shortest_path(
    g: &HotspotGraph,
    src: NodeId,
    dst: NodeId,
    weight: WeightKind,
) -> Result<Path, GraphError> {
    if dst as usize >= g.node_count() {
        return Err(GraphError::UnknownNode(dst));
    }
    if src == dst {
        if src as usize >= g.node_count() {
            return Err(GraphError::UnknownNode(src));
        }
        return Ok(Path { nodes: vec![src], cost: 0.0 });
    }
    let dist_to_dst = distances_from(g, dst, weight)?;
    if dist_to_dst[src as usize].is_infinite() {
        return Err(GraphError::Unreachable { src, dst });
    }
    let mut nodes = vec![src];
    let mut cur = src;
    while cur != dst {
        let next = greedy_next_hop(g, cur, &dist_to_dst, weight)
            .expect("a node at finite distance has an optimal neighbor");
        nodes.push(next);
        cur = next;
    }
    Ok(Path { nodes, cost: dist_to_dst[src as usize] })
}

/// Smallest-id neighbor of `cur` lying on a minimum-cost route toward the
/// node `dist_to_dst` was computed from. Addition order matches the Dijkstra
/// relaxation so the equality test is exact.
pub(crate) fn greedy_next_hop(
    g: &HotspotGraph,
    cur: NodeId,
    dist_to_dst: &[f64],
    weight: WeightKind,
) -> Option<NodeId> {
    let here = dist_to_dst[cur as usize];
    if !here.is_finite() || here == 0.0 {
        return None;
    }
    // Neighbors iterate in ascending id order, so the first hit is the
    // lexicographic choice.
    g.neighbors(cur)
        .find(|(v, e)| dist_to_dst[*v as usize] + e.weight(weight) == here)
        .map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spot(id: NodeId, lat: f64, lon: f64) -> Hotspot {
        Hotspot::new(id, lat, lon, format!("t{id}"))
    }

    fn grid_hotspots(n: usize) -> Vec<Hotspot> {
        (0..n)
            .map(|i| spot(i as NodeId, 41.0 + 0.01 * (i / 6) as f64, -87.0 + 0.01 * (i % 6) as f64))
            .collect()
    }

    /// Spherical law of cosines; independent of the haversine formula.
    fn law_of_cosines_km(a: &Hotspot, b: &Hotspot) -> f64 {
        let (la, lb) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = (la.sin() * lb.sin() + la.cos() * lb.cos() * dl.cos()).clamp(-1.0, 1.0);
        EARTH_RADIUS_KM * c.acos()
    }

    #[test]
    fn haversine_identity_is_zero() {
        let a = spot(0, 41.88, -87.63);
        assert_eq!(haversine_distance(&a, &a), 0.0);
    }

    #[test]
    fn haversine_quarter_circumference() {
        let a = spot(0, 0.0, 0.0);
        let b = spot(1, 0.0, 90.0);
        let expected = EARTH_RADIUS_KM * std::f64::consts::FRAC_PI_2;
        assert!((haversine_distance(&a, &b) - expected).abs() < 1e-9);
    }

    #[test]
    fn haversine_matches_law_of_cosines() {
        let a = spot(0, 41.88, -87.63);
        let b = spot(1, 41.89, -87.62);
        let h = haversine_distance(&a, &b);
        let c = law_of_cosines_km(&a, &b);
        assert!((h - c).abs() / c < 1e-6, "haversine {h} vs law-of-cosines {c}");
    }

    #[test]
    fn haversine_symmetric_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p: Vec<Hotspot> = (0..3)
                .map(|i| spot(i, rng.gen_range(-89.0..89.0), rng.gen_range(-179.0..179.0)))
                .collect();
            let ab = haversine_distance(&p[0], &p[1]);
            let ba = haversine_distance(&p[1], &p[0]);
            assert_eq!(ab, ba);
            let bc = haversine_distance(&p[1], &p[2]);
            let ac = haversine_distance(&p[0], &p[2]);
            assert!(ac <= ab + bc + 1e-9, "triangle violated: {ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn complete_graph_edge_counts() {
        for (n, expected) in [(2usize, 1usize), (26, 325), (31, 465)] {
            let g = build_complete_graph(grid_hotspots(n), &HaversineProvider, 30.0).unwrap();
            assert_eq!(g.edge_count(), expected, "n = {n}");
        }
    }

    #[test]
    fn complete_graph_travel_time_from_speed() {
        let g = build_complete_graph(grid_hotspots(2), &HaversineProvider, 30.0).unwrap();
        let e = &g.edges()[0];
        assert!((e.travel_time_s - e.distance_km / 30.0 * 3600.0).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_rejects_single_hotspot() {
        let err = build_complete_graph(grid_hotspots(1), &HaversineProvider, 30.0).unwrap_err();
        assert!(matches!(err, GraphError::TooFewHotspots { .. }));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        let hs = grid_hotspots(3);
        assert!(matches!(
            HotspotGraph::new(hs.clone(), vec![Edge::new(0, 0, 1.0, 1.0)]),
            Err(GraphError::SelfLoop { .. })
        ));
        assert!(matches!(
            HotspotGraph::new(hs.clone(), vec![Edge::new(0, 7, 1.0, 1.0)]),
            Err(GraphError::UnknownEndpoint { .. })
        ));
        assert!(matches!(
            HotspotGraph::new(hs.clone(), vec![Edge::new(0, 1, 1.0, 1.0), Edge::new(1, 0, 2.0, 2.0)]),
            Err(GraphError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            HotspotGraph::new(hs.clone(), vec![Edge::new(0, 1, 1.0, 0.0)]),
            Err(GraphError::InvalidTravelTime { .. })
        ));
        let mut bad = grid_hotspots(2);
        bad[1].lat = 91.0;
        assert!(matches!(HotspotGraph::new(bad, vec![]), Err(GraphError::LatitudeOutOfRange { .. })));
    }

    fn graph_from_weights(n: usize, weighted: &[(NodeId, NodeId, f64)]) -> HotspotGraph {
        let edges = weighted.iter().map(|&(u, v, w)| Edge::new(u, v, w, w)).collect();
        HotspotGraph::new(grid_hotspots(n), edges).unwrap()
    }

    #[test]
    fn mst_of_path_graph_is_itself() {
        let g = graph_from_weights(4, &[(0, 1, 5.0), (1, 2, 1.0), (2, 3, 9.0)]);
        let mst = minimum_spanning_tree(&g, WeightKind::Distance).unwrap();
        assert_eq!(mst.len(), 3);
        assert_eq!(mst.iter().map(Edge::key).collect::<Vec<_>>(), vec![(0, 1), (1, 2), (2, 3)]);
    }

    /// Exhaustive spanning-tree enumeration: minimum total weight over all
    /// (n-1)-edge subsets that span the graph.
    fn brute_force_mst_weight(g: &HotspotGraph, weight: WeightKind) -> Option<f64> {
        let n = g.node_count();
        let m = g.edge_count();
        let k = n - 1;
        if m < k {
            return None;
        }
        let mut best: Option<f64> = None;
        let mut pick: Vec<usize> = (0..k).collect();
        loop {
            let mut uf = UnionFind::new(n);
            let mut joins = 0;
            let mut total = 0.0;
            for &i in &pick {
                let e = &g.edges()[i];
                if uf.union(e.u, e.v) {
                    joins += 1;
                }
                total += e.weight(weight);
            }
            if joins == k && best.map_or(true, |b| total < b) {
                best = Some(total);
            }
            // next combination
            let mut i = k;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if pick[i] != i + m - k {
                    break;
                }
            }
            pick[i] += 1;
            for j in (i + 1)..k {
                pick[j] = pick[j - 1] + 1;
            }
        }
    }

    #[test]
    fn mst_k4_matches_enumeration() {
        let g = graph_from_weights(
            4,
            &[(0, 1, 1.0), (0, 2, 2.0), (0, 3, 4.0), (1, 2, 3.0), (1, 3, 5.0), (2, 3, 6.0)],
        );
        let mst = minimum_spanning_tree(&g, WeightKind::Distance).unwrap();
        let total: f64 = mst.iter().map(|e| e.distance_km).sum();
        let best = brute_force_mst_weight(&g, WeightKind::Distance).unwrap();
        assert_eq!(total, best);
        assert_eq!(mst.iter().map(Edge::key).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn mst_random_graphs_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let n = rng.gen_range(3..=7);
            let mut weighted = Vec::new();
            for u in 0..n as NodeId {
                for v in (u + 1)..n as NodeId {
                    if rng.gen_bool(0.7) {
                        weighted.push((u, v, rng.gen_range(1..20) as f64));
                    }
                }
            }
            let g = graph_from_weights(n, &weighted);
            match minimum_spanning_tree(&g, WeightKind::Distance) {
                Ok(mst) => {
                    let total: f64 = mst.iter().map(|e| e.distance_km).sum();
                    assert_eq!(Some(total), brute_force_mst_weight(&g, WeightKind::Distance));
                }
                Err(GraphError::Disconnected { .. }) => {
                    assert!(!is_connected(&g));
                }
                Err(other) => panic!("unexpected error: {other}"),
            }
        }
    }

    #[test]
    fn mst_deterministic_under_ties() {
        let g = graph_from_weights(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]);
        let a = minimum_spanning_tree(&g, WeightKind::Distance).unwrap();
        for _ in 0..5 {
            assert_eq!(minimum_spanning_tree(&g, WeightKind::Distance).unwrap(), a);
        }
        // tie-break (weight, u, v) picks the star at node 0
        assert_eq!(a.iter().map(Edge::key).collect::<Vec<_>>(), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn mst_26_node_clique_has_25_edges() {
        let g = build_complete_graph(grid_hotspots(26), &HaversineProvider, 30.0).unwrap();
        assert_eq!(minimum_spanning_tree(&g, WeightKind::Distance).unwrap().len(), 25);
    }

    #[test]
    fn shortest_path_trivial_and_triangle() {
        let g = graph_from_weights(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0)]);
        let same = shortest_path(&g, 1, 1, WeightKind::TravelTime).unwrap();
        assert_eq!(same, Path { nodes: vec![1], cost: 0.0 });
        let p = shortest_path(&g, 0, 2, WeightKind::TravelTime).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.cost, 2.0);
    }

    /// Brute force over all simple paths.
    fn brute_force_shortest(g: &HotspotGraph, src: NodeId, dst: NodeId, weight: WeightKind) -> Option<(Vec<NodeId>, f64)> {
        fn explore(
            g: &HotspotGraph,
            cur: NodeId,
            dst: NodeId,
            weight: WeightKind,
            visited: &mut Vec<bool>,
            path: &mut Vec<NodeId>,
            cost: f64,
            best: &mut Option<(Vec<NodeId>, f64)>,
        ) {
            if cur == dst {
                let better = match best {
                    None => true,
                    Some((bp, bc)) => cost < *bc || (cost == *bc && path[..] < bp[..]),
                };
                if better {
                    *best = Some((path.clone(), cost));
                }
                return;
            }
            for (v, e) in g.neighbors(cur) {
                if !visited[v as usize] {
                    visited[v as usize] = true;
                    path.push(v);
                    explore(g, v, dst, weight, visited, path, cost + e.weight(weight), best);
                    path.pop();
                    visited[v as usize] = false;
                }
            }
        }
        let mut visited = vec![false; g.node_count()];
        visited[src as usize] = true;
        let mut best = None;
        explore(g, src, dst, weight, &mut visited, &mut vec![src], 0.0, &mut best);
        best
    }

    #[test]
    fn shortest_path_matches_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(4..=7);
            let mut weighted = Vec::new();
            for u in 0..n as NodeId {
                for v in (u + 1)..n as NodeId {
                    if rng.gen_bool(0.6) {
                        weighted.push((u, v, rng.gen_range(1..10) as f64));
                    }
                }
            }
            let g = graph_from_weights(n, &weighted);
            for src in 0..n as NodeId {
                for dst in 0..n as NodeId {
                    let got = shortest_path(&g, src, dst, WeightKind::Distance);
                    match brute_force_shortest(&g, src, dst, WeightKind::Distance) {
                        Some((nodes, cost)) => {
                            let p = got.unwrap();
                            assert_eq!(p.cost, cost, "cost mismatch {src}->{dst}");
                            assert_eq!(p.nodes, nodes, "tie-break mismatch {src}->{dst}");
                        }
                        None => assert!(matches!(got, Err(GraphError::Unreachable { .. }))),
                    }
                }
            }
        }
    }

    #[test]
    fn shortest_path_on_tree_is_unique_tree_path() {
        let g = graph_from_weights(5, &[(0, 1, 2.0), (1, 2, 2.0), (1, 3, 5.0), (3, 4, 1.0)]);
        let p = shortest_path(&g, 2, 4, WeightKind::Distance).unwrap();
        assert_eq!(p.nodes, vec![2, 1, 3, 4]);
        assert_eq!(p.cost, 8.0);
    }

    #[test]
    fn subgraph_paths_never_beat_complete_graph() {
        let full = build_complete_graph(grid_hotspots(10), &HaversineProvider, 30.0).unwrap();
        let mst_edges = minimum_spanning_tree(&full, WeightKind::Distance).unwrap();
        let sub = full.with_edges(mst_edges).unwrap();
        for src in 0..10 {
            for dst in 0..10 {
                let a = shortest_path(&full, src, dst, WeightKind::Distance).unwrap().cost;
                let b = shortest_path(&sub, src, dst, WeightKind::Distance).unwrap().cost;
                assert!(b >= a - 1e-12, "{src}->{dst}: backbone {b} < complete {a}");
            }
        }
    }

    #[test]
    fn connectivity_cases() {
        let single = HotspotGraph::new(grid_hotspots(1), vec![]).unwrap();
        assert!(is_connected(&single));
        let two = HotspotGraph::new(grid_hotspots(2), vec![]).unwrap();
        assert!(!is_connected(&two));
    }

    #[test]
    fn connectivity_agrees_with_bfs_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let n = 20;
            let mut weighted = Vec::new();
            for u in 0..n as NodeId {
                for v in (u + 1)..n as NodeId {
                    if rng.gen_bool(0.08) {
                        weighted.push((u, v, 1.0));
                    }
                }
            }
            let g = graph_from_weights(n, &weighted);
            // independent BFS with an explicit queue
            let mut reached = vec![false; n];
            let mut queue = std::collections::VecDeque::from([0 as NodeId]);
            reached[0] = true;
            while let Some(u) = queue.pop_front() {
                for (v, _) in g.neighbors(u) {
                    if !reached[v as usize] {
                        reached[v as usize] = true;
                        queue.push_back(v);
                    }
                }
            }
            assert_eq!(is_connected(&g), reached.iter().all(|&r| r));
        }
    }

    #[test]
    fn disconnected_mst_names_unreachable_node() {
        let g = graph_from_weights(4, &[(0, 1, 1.0)]);
        match minimum_spanning_tree(&g, WeightKind::Distance) {
            Err(GraphError::Disconnected { unreachable }) => assert_eq!(unreachable, 2),
            other => panic!("expected disconnected error, got {other:?}"),
        }
    }
}
