//! Deterministic discrete-event delivery simulation with opportunistic
//! bundling and bundle merging over any connected backbone.
//!
//! Requests become visible at their earliest pickup time and queue at their
//! pickup hotspot, grouped by next-hop direction. A group dispatches when it
//! reaches vehicle capacity or when the hold window measured from its oldest
//! member expires. En route, a vehicle heads toward the next hop of its
//! oldest onboard request; at every hotspot it first drops off terminating
//! requests, hands members whose shortest paths diverge from that direction
//! back to the local waiting pool (they continue on a later vehicle), then
//! absorbs waiting same-direction requests up to capacity. Every request
//! therefore rides exactly its own shortest path, possibly split across
//! several carrying vehicles. With bundling disabled every request gets a
//! dedicated vehicle on its full backbone shortest path, departing the
//! moment it becomes visible.
//!
//! The event loop is single-threaded and fully deterministic: ties resolve
//! by (time, event class, insertion order), and all FIFO queues follow
//! arrival order with request id as the final tie-break.

use crate::graph::{GraphError, HotspotGraph, NodeId};
use crate::umst::NextHopTable;
use crate::workload::DeliveryRequest;
use crate::WeightKind;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid fleet config: {0}")]
    InvalidConfig(String),
    #[error("requests must be sorted by earliest_pickup_s (violated at index {index})")]
    UnsortedRequests { index: usize },
    #[error("duplicate request id {0}")]
    DuplicateRequestId(u32),
    #[error("request {request}: pickup equals dropoff ({hotspot})")]
    PickupEqualsDropoff { request: u32, hotspot: NodeId },
    #[error("request {request}: hotspot {hotspot} not in backbone")]
    UnknownHotspot { request: u32, hotspot: NodeId },
    #[error("backbone rejected: {0}")]
    Setup(#[from] GraphError),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
}

/// Where vehicles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SpawnMode {
    /// Unbounded fleet: a vehicle materializes at the pickup hotspot for
    /// every dispatch and retires when empty.
    OnDemand,
    /// A fixed pool of vehicle tokens. Dispatches wait for a free token;
    /// a retiring vehicle returns its token. Repositioning is not modeled:
    /// a freed token serves the next pending dispatch wherever it is.
    FixedPool { size: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    pub vehicle_capacity: u32,
    /// Seconds a direction group may wait (measured from its oldest member)
    /// before a vehicle departs anyway.
    pub dispatch_hold_s: f64,
    /// Fleet speed used when travel times must be derived from raw
    /// distances (graph construction); the simulation itself always moves
    /// vehicles by the backbone's per-edge travel times.
    pub vehicle_speed_kmh: f64,
    pub spawn_mode: SpawnMode,
    pub bundling_enabled: bool,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            vehicle_capacity: 5,
            dispatch_hold_s: 30.0,
            vehicle_speed_kmh: 30.0,
            spawn_mode: SpawnMode::OnDemand,
            bundling_enabled: true,
        }
    }
}

impl FleetConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.vehicle_capacity < 1 {
            return Err(SimError::InvalidConfig("vehicle_capacity must be at least 1".into()));
        }
        if !(self.dispatch_hold_s >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "dispatch_hold_s must be nonnegative, got {}",
                self.dispatch_hold_s
            )));
        }
        if !(self.vehicle_speed_kmh > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "vehicle_speed_kmh must be positive, got {}",
                self.vehicle_speed_kmh
            )));
        }
        if let SpawnMode::FixedPool { size } = self.spawn_mode {
            if size < 1 {
                return Err(SimError::InvalidConfig("FixedPool size must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// One waiting request plus the time it entered this queue (its visibility
/// time at its pickup hotspot, or the handoff time at a relay point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitingEntry {
    pub request: u32,
    pub entered_at: f64,
}

/// Waiting requests at one hotspot, grouped by next-hop direction, FIFO
/// within each group.
#[derive(Debug, Default, Clone)]
pub struct HotspotState {
    groups: BTreeMap<NodeId, VecDeque<WaitingEntry>>,
}

impl HotspotState {
    pub fn enqueue(&mut self, direction: NodeId, request: u32, entered_at: f64) {
        self.groups.entry(direction).or_default().push_back(WaitingEntry { request, entered_at });
    }

    pub fn group_len(&self, direction: NodeId) -> usize {
        self.groups.get(&direction).map_or(0, VecDeque::len)
    }

    pub fn front(&self, direction: NodeId) -> Option<WaitingEntry> {
        self.groups.get(&direction).and_then(|q| q.front().copied())
    }

    /// Removes and returns up to `max` requests from the front of the group.
    pub fn take_prefix(&mut self, direction: NodeId, max: usize) -> Vec<u32> {
        match self.groups.get_mut(&direction) {
            Some(q) => {
                let take = max.min(q.len());
                let taken = q.drain(..take).map(|e| e.request).collect();
                if q.is_empty() {
                    self.groups.remove(&direction);
                }
                taken
            }
            None => Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Waiting requests at `state` whose next hop is `direction`, FIFO-ordered
/// and truncated to `capacity`. Non-destructive.
pub fn candidate_bundle(state: &HotspotState, direction: NodeId, capacity: usize) -> Vec<u32> {
    state
        .groups
        .get(&direction)
        .map(|q| q.iter().map(|e| e.request).take(capacity).collect())
        .unwrap_or_default()
}

/// One merge event in a bundle's lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub t_s: f64,
    pub hotspot: NodeId,
    pub absorbed: Vec<u32>,
}

/// Requests sharing a vehicle, in boarding order, with merge lineage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bundle {
    pub members: Vec<u32>,
    pub lineage: Vec<MergeRecord>,
}

impl Bundle {
    pub fn new(members: Vec<u32>) -> Self {
        Self { members, lineage: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Merges waiting same-direction requests at `state` into `inbound`, up to
/// `capacity` total. Returns the absorbed request ids (possibly empty) and
/// records the merge in the bundle lineage when anything was absorbed.
pub fn merge_bundle(
    inbound: &mut Bundle,
    state: &mut HotspotState,
    direction: NodeId,
    capacity: usize,
    t_s: f64,
    hotspot: NodeId,
) -> Vec<u32> {
    let spare = capacity.saturating_sub(inbound.members.len());
    if spare == 0 {
        return Vec::new();
    }
    let absorbed = state.take_prefix(direction, spare);
    if !absorbed.is_empty() {
        inbound.members.extend(&absorbed);
        inbound.lineage.push(MergeRecord { t_s, hotspot, absorbed: absorbed.clone() });
    }
    absorbed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Arrive,
    Depart,
    Pickup,
    Dropoff,
    Merge,
    Complete,
}

/// One record of the serialized event log (JSON lines, one per event).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
    pub vehicle: u32,
    pub hotspot: NodeId,
    pub requests: Vec<u32>,
    /// Length of the traversed leg; present on arrive events.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestOutcome {
    pub request_id: u32,
    pub vehicle: Option<u32>,
    pub pickup_time_s: Option<f64>,
    pub delivered_time_s: Option<f64>,
    pub completed: bool,
    /// Completed, picked up no earlier than the request's earliest pickup,
    /// and delivered by its deadline.
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleLog {
    pub id: u32,
    /// Hotspots visited, in order. `arrival_times_s[i]` is the time at
    /// `route[i]`; index 0 is the spawn/departure hotspot.
    pub route: Vec<NodeId>,
    pub arrival_times_s: Vec<f64>,
    /// Occupants of each traversed leg (`route[i]` to `route[i+1]`).
    pub leg_loads: Vec<Vec<u32>>,
    pub leg_distance_km: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEventRecord {
    pub t_s: f64,
    pub hotspot: NodeId,
    pub vehicle: u32,
    pub absorbed: Vec<u32>,
}

/// Full result of one simulation run: the event log plus per-request and
/// per-vehicle views derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    pub outcomes: Vec<RequestOutcome>,
    pub vehicles: Vec<VehicleLog>,
    pub bundle_events: Vec<BundleEventRecord>,
    pub total_travel_time_s: f64,
    pub seed: u64,
    pub capacity: u32,
    pub bundling_enabled: bool,
}

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pending {
    RequestArrival { req: u32 },
    VehicleArrive { vehicle: u32, hotspot: NodeId },
    HoldExpiry { hotspot: NodeId, direction: NodeId },
}

impl Pending {
    fn class(&self) -> u8 {
        match self {
            Pending::RequestArrival { .. } => 0,
            Pending::VehicleArrive { .. } => 1,
            Pending::HoldExpiry { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    t: f64,
    class: u8,
    seq: u64,
    pending: Pending,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed so BinaryHeap pops the earliest event first
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.class.cmp(&self.class))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct VehicleState {
    route: Vec<NodeId>,
    times: Vec<f64>,
    leg_loads: Vec<Vec<u32>>,
    leg_distance_km: Vec<f64>,
    onboard: Bundle,
}

struct Engine<'a> {
    graph: &'a HotspotGraph,
    table: NextHopTable,
    requests: &'a [DeliveryRequest],
    fleet: &'a FleetConfig,
    queue: BinaryHeap<Queued>,
    seq: u64,
    waiting: Vec<HotspotState>,
    vehicles: Vec<VehicleState>,
    outcomes: Vec<RequestOutcome>,
    events: Vec<TraceEvent>,
    bundle_events: Vec<BundleEventRecord>,
    /// None for on-demand spawning, Some(free) for a fixed pool.
    free_tokens: Option<u32>,
    ready_dispatches: VecDeque<(NodeId, NodeId)>,
}

impl<'a> Engine<'a> {
    fn push(&mut self, t: f64, pending: Pending) {
        let q = Queued { t, class: pending.class(), seq: self.seq, pending };
        self.seq += 1;
        self.queue.push(q);
    }

    fn emit(
        &mut self,
        t: f64,
        kind: EventKind,
        vehicle: u32,
        hotspot: NodeId,
        requests: Vec<u32>,
        distance_km: Option<f64>,
    ) {
        self.events.push(TraceEvent { t, kind, vehicle, hotspot, requests, distance_km });
    }

    fn request(&self, idx: u32) -> &DeliveryRequest {
        &self.requests[idx as usize]
    }

    fn ids(&self, idxs: &[u32]) -> Vec<u32> {
        idxs.iter().map(|&i| self.request(i).id).collect()
    }

    /// Direction a request waiting at `hotspot` should head next.
    fn direction_from(&self, hotspot: NodeId, idx: u32) -> NodeId {
        self.table
            .next_hop(hotspot, self.request(idx).dropoff)
            .expect("waiting requests are never at their destination")
    }

    /// Adds a request to the hotspot's direction group, dispatching at
    /// capacity and arming the hold window otherwise.
    fn enqueue_waiting(&mut self, t: f64, hotspot: NodeId, idx: u32) {
        let dir = self.direction_from(hotspot, idx);
        self.waiting[hotspot as usize].enqueue(dir, idx, t);
        let len = self.waiting[hotspot as usize].group_len(dir);
        if len >= self.fleet.vehicle_capacity as usize {
            self.try_dispatch(t, hotspot, dir);
        } else if len == 1 {
            self.push(t + self.fleet.dispatch_hold_s, Pending::HoldExpiry { hotspot, direction: dir });
        }
    }

    fn on_request_arrival(&mut self, t: f64, idx: u32) {
        if !self.fleet.bundling_enabled {
            let pickup = self.request(idx).pickup;
            let dir = self.direction_from(pickup, idx);
            self.spawn_and_depart(t, pickup, dir, vec![idx]);
            return;
        }
        self.enqueue_waiting(t, self.request(idx).pickup, idx);
    }

    fn on_hold_expiry(&mut self, t: f64, hotspot: NodeId, direction: NodeId) {
        let Some(front) = self.waiting[hotspot as usize].front(direction) else {
            return; // group emptied by a dispatch or merge; stale event
        };
        let due = front.entered_at + self.fleet.dispatch_hold_s;
        if t >= due {
            self.try_dispatch(t, hotspot, direction);
        } else {
            // oldest member changed since scheduling; fire again when due
            self.push(due, Pending::HoldExpiry { hotspot, direction });
        }
    }

    /// Dispatches the FIFO prefix of the group if a vehicle is available;
    /// otherwise parks the dispatch until a pool token frees up.
    fn try_dispatch(&mut self, t: f64, hotspot: NodeId, direction: NodeId) {
        if self.waiting[hotspot as usize].group_len(direction) == 0 {
            return;
        }
        if self.free_tokens == Some(0) {
            if !self.ready_dispatches.contains(&(hotspot, direction)) {
                self.ready_dispatches.push_back((hotspot, direction));
            }
            return;
        }
        let members =
            self.waiting[hotspot as usize].take_prefix(direction, self.fleet.vehicle_capacity as usize);
        self.spawn_and_depart(t, hotspot, direction, members);
        // anything left behind starts a fresh hold window from its oldest
        if let Some(front) = self.waiting[hotspot as usize].front(direction) {
            let due = front.entered_at + self.fleet.dispatch_hold_s;
            self.push(due.max(t), Pending::HoldExpiry { hotspot, direction });
        }
    }

    fn spawn_and_depart(&mut self, t: f64, hotspot: NodeId, direction: NodeId, members: Vec<u32>) {
        if let Some(tokens) = &mut self.free_tokens {
            *tokens -= 1;
        }
        let vehicle = self.vehicles.len() as u32;
        self.vehicles.push(VehicleState {
            route: vec![hotspot],
            times: vec![t],
            leg_loads: Vec::new(),
            leg_distance_km: Vec::new(),
            onboard: Bundle::new(members.clone()),
        });
        let ids = self.ids(&members);
        self.emit(t, EventKind::Pickup, vehicle, hotspot, ids, None);
        self.record_boarding(t, vehicle, &members);
        self.depart(t, vehicle, hotspot, direction);
    }

    /// Pickup time is the first boarding; the recorded vehicle is the most
    /// recent carrier (and so, once delivered, the delivering one).
    fn record_boarding(&mut self, t: f64, vehicle: u32, members: &[u32]) {
        for idx in members {
            let o = &mut self.outcomes[*idx as usize];
            o.vehicle = Some(vehicle);
            if o.pickup_time_s.is_none() {
                o.pickup_time_s = Some(t);
            }
        }
    }

    fn depart(&mut self, t: f64, vehicle: u32, from: NodeId, to: NodeId) {
        let edge =
            *self.graph.edge_between(from, to).expect("next-hop directions are backbone neighbors");
        let onboard = self.vehicles[vehicle as usize].onboard.members.clone();
        let ids = self.ids(&onboard);
        self.emit(t, EventKind::Depart, vehicle, from, ids, None);
        let state = &mut self.vehicles[vehicle as usize];
        state.leg_loads.push(onboard);
        state.leg_distance_km.push(edge.distance_km);
        self.push(t + edge.travel_time_s, Pending::VehicleArrive { vehicle, hotspot: to });
    }

    fn on_vehicle_arrive(&mut self, t: f64, vehicle: u32, hotspot: NodeId) {
        let leg_dist = *self.vehicles[vehicle as usize].leg_distance_km.last().unwrap();
        {
            let state = &mut self.vehicles[vehicle as usize];
            state.route.push(hotspot);
            state.times.push(t);
        }
        let onboard = self.vehicles[vehicle as usize].onboard.members.clone();
        let onboard_ids = self.ids(&onboard);
        self.emit(t, EventKind::Arrive, vehicle, hotspot, onboard_ids, Some(leg_dist));

        // drop off everyone terminating here before any merge consideration
        let (terminating, continuing): (Vec<u32>, Vec<u32>) =
            onboard.iter().partition(|&&idx| self.request(idx).dropoff == hotspot);
        if !terminating.is_empty() {
            let ids = self.ids(&terminating);
            self.emit(t, EventKind::Dropoff, vehicle, hotspot, ids, None);
            for idx in &terminating {
                let r = self.request(*idx);
                let (earliest, deadline) = (r.earliest_pickup_s, r.deadline_s);
                let o = &mut self.outcomes[*idx as usize];
                o.delivered_time_s = Some(t);
                o.completed = true;
                o.success = o.pickup_time_s.map_or(false, |p| p >= earliest) && t <= deadline;
            }
            self.vehicles[vehicle as usize].onboard.members = continuing;
        }

        if self.vehicles[vehicle as usize].onboard.is_empty() {
            self.emit(t, EventKind::Complete, vehicle, hotspot, Vec::new(), None);
            if let Some(tokens) = &mut self.free_tokens {
                *tokens += 1;
            }
            self.drain_ready(t);
            return;
        }

        // oldest onboard request steers the vehicle
        let oldest = self.vehicles[vehicle as usize].onboard.members[0];
        let direction = self.direction_from(hotspot, oldest);

        if self.fleet.bundling_enabled {
            // members whose shortest path diverges here are handed back to
            // the waiting pool and continue on a later vehicle; what stays
            // onboard always shares the travel direction
            let members = std::mem::take(&mut self.vehicles[vehicle as usize].onboard.members);
            let (stay, diverge): (Vec<u32>, Vec<u32>) =
                members.iter().partition(|&&idx| self.direction_from(hotspot, idx) == direction);
            self.vehicles[vehicle as usize].onboard.members = stay;
            for idx in diverge {
                self.enqueue_waiting(t, hotspot, idx);
            }

            let capacity = self.fleet.vehicle_capacity as usize;
            let mut bundle = std::mem::take(&mut self.vehicles[vehicle as usize].onboard);
            let absorbed = merge_bundle(
                &mut bundle,
                &mut self.waiting[hotspot as usize],
                direction,
                capacity,
                t,
                hotspot,
            );
            self.vehicles[vehicle as usize].onboard = bundle;
            if !absorbed.is_empty() {
                let ids = self.ids(&absorbed);
                self.emit(t, EventKind::Merge, vehicle, hotspot, ids.clone(), None);
                self.emit(t, EventKind::Pickup, vehicle, hotspot, ids.clone(), None);
                self.record_boarding(t, vehicle, &absorbed);
                self.bundle_events.push(BundleEventRecord { t_s: t, hotspot, vehicle, absorbed: ids });
            }
        }
        self.depart(t, vehicle, hotspot, direction);
    }

    fn drain_ready(&mut self, t: f64) {
        while self.free_tokens.map_or(false, |k| k > 0) {
            let Some((hotspot, direction)) = self.ready_dispatches.pop_front() else {
                return;
            };
            self.try_dispatch(t, hotspot, direction);
        }
    }
}

/// Runs the delivery simulation over `backbone` and returns the full trace.
///
/// `requests` must be sorted by `earliest_pickup_s` and reference valid
/// hotspots. The run is deterministic given its inputs; `seed` is recorded
/// in the trace for provenance and reserved for stochastic fleet extensions.
pub fn run_simulation(
    backbone: &HotspotGraph,
    requests: &[DeliveryRequest],
    fleet: &FleetConfig,
    seed: u64,
) -> Result<SimTrace, SimError> {
    fleet.validate()?;
    let n = backbone.node_count();
    let mut seen = std::collections::HashSet::with_capacity(requests.len());
    for (i, r) in requests.iter().enumerate() {
        if i > 0 && r.earliest_pickup_s < requests[i - 1].earliest_pickup_s {
            return Err(SimError::UnsortedRequests { index: i });
        }
        if !seen.insert(r.id) {
            return Err(SimError::DuplicateRequestId(r.id));
        }
        if r.pickup as usize >= n {
            return Err(SimError::UnknownHotspot { request: r.id, hotspot: r.pickup });
        }
        if r.dropoff as usize >= n {
            return Err(SimError::UnknownHotspot { request: r.id, hotspot: r.dropoff });
        }
        if r.pickup == r.dropoff {
            return Err(SimError::PickupEqualsDropoff { request: r.id, hotspot: r.pickup });
        }
    }
    let table = NextHopTable::build(backbone, WeightKind::TravelTime)?;

    let mut engine = Engine {
        graph: backbone,
        table,
        requests,
        fleet,
        queue: BinaryHeap::new(),
        seq: 0,
        waiting: vec![HotspotState::default(); n],
        vehicles: Vec::new(),
        outcomes: requests
            .iter()
            .map(|r| RequestOutcome {
                request_id: r.id,
                vehicle: None,
                pickup_time_s: None,
                delivered_time_s: None,
                completed: false,
                success: false,
            })
            .collect(),
        events: Vec::new(),
        bundle_events: Vec::new(),
        free_tokens: match fleet.spawn_mode {
            SpawnMode::OnDemand => None,
            SpawnMode::FixedPool { size } => Some(size),
        },
        ready_dispatches: VecDeque::new(),
    };

    for (idx, r) in requests.iter().enumerate() {
        engine.push(r.earliest_pickup_s, Pending::RequestArrival { req: idx as u32 });
    }
    while let Some(q) = engine.queue.pop() {
        match q.pending {
            Pending::RequestArrival { req } => engine.on_request_arrival(q.t, req),
            Pending::VehicleArrive { vehicle, hotspot } => {
                engine.on_vehicle_arrive(q.t, vehicle, hotspot)
            }
            Pending::HoldExpiry { hotspot, direction } => {
                engine.on_hold_expiry(q.t, hotspot, direction)
            }
        }
    }

    let total_travel_time_s = engine
        .vehicles
        .iter()
        .map(|v| v.times.last().unwrap() - v.times.first().unwrap())
        .sum();
    let vehicles = engine
        .vehicles
        .into_iter()
        .enumerate()
        .map(|(id, v)| VehicleLog {
            id: id as u32,
            route: v.route,
            arrival_times_s: v.times,
            leg_loads: v
                .leg_loads
                .iter()
                .map(|legs| legs.iter().map(|&i| requests[i as usize].id).collect())
                .collect(),
            leg_distance_km: v.leg_distance_km,
        })
        .collect();

    Ok(SimTrace {
        events: engine.events,
        outcomes: engine.outcomes,
        vehicles,
        bundle_events: engine.bundle_events,
        total_travel_time_s,
        seed,
        capacity: fleet.vehicle_capacity,
        bundling_enabled: fleet.bundling_enabled,
    })
}

impl SimTrace {
    /// Rebuilds the derived per-request and per-vehicle views from a raw
    /// event log (as loaded from a JSONL trace file).
    pub fn from_events(
        events: Vec<TraceEvent>,
        requests: &[DeliveryRequest],
        capacity: u32,
        bundling_enabled: bool,
        seed: u64,
    ) -> Result<Self, SimError> {
        let by_id: BTreeMap<u32, &DeliveryRequest> = requests.iter().map(|r| (r.id, r)).collect();
        if by_id.len() != requests.len() {
            return Err(SimError::MalformedTrace("duplicate request ids in request list".into()));
        }
        let mut vehicles: BTreeMap<u32, VehicleLog> = BTreeMap::new();
        let mut pending_leg: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        let mut outcomes: BTreeMap<u32, RequestOutcome> = requests
            .iter()
            .map(|r| {
                (
                    r.id,
                    RequestOutcome {
                        request_id: r.id,
                        vehicle: None,
                        pickup_time_s: None,
                        delivered_time_s: None,
                        completed: false,
                        success: false,
                    },
                )
            })
            .collect();
        let mut bundle_events = Vec::new();

        for (i, ev) in events.iter().enumerate() {
            let err = |msg: String| SimError::MalformedTrace(format!("event {i}: {msg}"));
            match ev.kind {
                EventKind::Pickup => {
                    for id in &ev.requests {
                        let o = outcomes
                            .get_mut(id)
                            .ok_or_else(|| err(format!("unknown request {id}")))?;
                        // first boarding wins for the pickup time; the last
                        // carrier is the one that ends up delivering
                        o.vehicle = Some(ev.vehicle);
                        if o.pickup_time_s.is_none() {
                            o.pickup_time_s = Some(ev.t);
                        }
                    }
                }
                EventKind::Depart => {
                    let log = vehicles.entry(ev.vehicle).or_insert_with(|| VehicleLog {
                        id: ev.vehicle,
                        route: vec![ev.hotspot],
                        arrival_times_s: vec![ev.t],
                        leg_loads: Vec::new(),
                        leg_distance_km: Vec::new(),
                    });
                    if *log.route.last().unwrap() != ev.hotspot {
                        return Err(err(format!(
                            "vehicle {} departs {} but was last seen at {}",
                            ev.vehicle,
                            ev.hotspot,
                            log.route.last().unwrap()
                        )));
                    }
                    pending_leg.insert(ev.vehicle, ev.requests.clone());
                }
                EventKind::Arrive => {
                    let log = vehicles
                        .get_mut(&ev.vehicle)
                        .ok_or_else(|| err(format!("vehicle {} arrives before departing", ev.vehicle)))?;
                    let load = pending_leg
                        .remove(&ev.vehicle)
                        .ok_or_else(|| err(format!("vehicle {} arrives without a depart", ev.vehicle)))?;
                    let dist =
                        ev.distance_km.ok_or_else(|| err("arrive event missing distance_km".into()))?;
                    log.route.push(ev.hotspot);
                    log.arrival_times_s.push(ev.t);
                    log.leg_loads.push(load);
                    log.leg_distance_km.push(dist);
                }
                EventKind::Dropoff => {
                    for id in &ev.requests {
                        let o = outcomes
                            .get_mut(id)
                            .ok_or_else(|| err(format!("unknown request {id}")))?;
                        o.delivered_time_s = Some(ev.t);
                        o.completed = true;
                    }
                }
                EventKind::Merge => {
                    bundle_events.push(BundleEventRecord {
                        t_s: ev.t,
                        hotspot: ev.hotspot,
                        vehicle: ev.vehicle,
                        absorbed: ev.requests.clone(),
                    });
                }
                EventKind::Complete => {}
            }
        }
        for (id, o) in &mut outcomes {
            if o.completed {
                let r = by_id[id];
                o.success = o.pickup_time_s.map_or(false, |p| p >= r.earliest_pickup_s)
                    && o.delivered_time_s.map_or(false, |d| d <= r.deadline_s);
            }
        }
        let total_travel_time_s = vehicles
            .values()
            .map(|v| v.arrival_times_s.last().unwrap() - v.arrival_times_s.first().unwrap())
            .sum();
        Ok(SimTrace {
            events,
            outcomes: outcomes.into_values().collect(),
            vehicles: vehicles.into_values().collect(),
            bundle_events,
            total_travel_time_s,
            seed,
            capacity,
            bundling_enabled,
        })
    }
}

// ---------------------------------------------------------------------------
// Trace validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Assignment,
    Precedence,
    Capacity,
    EdgeFeasibility,
    Timing,
    Success,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn add(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

const TIMING_TOLERANCE_S: f64 = 1e-9;

/// Independently re-checks the feasibility constraints of a trace:
/// assignment uniqueness, pickup-before-dropoff on the assigned route,
/// per-leg capacity, backbone edge feasibility, timing consistency against
/// recomputed travel-time sums, and the success predicate. Violations are
/// data, not errors.
pub fn validate_trace(
    trace: &SimTrace,
    backbone: &HotspotGraph,
    requests: &[DeliveryRequest],
) -> ValidationReport {
    validate_trace_inner(trace, Some(backbone), requests)
}

/// The subset of [`validate_trace`] that needs no backbone: assignment,
/// precedence, capacity, monotone timing, and the success predicate. Edge
/// feasibility and travel-time recomputation are skipped.
pub fn validate_trace_partial(trace: &SimTrace, requests: &[DeliveryRequest]) -> ValidationReport {
    validate_trace_inner(trace, None, requests)
}

fn validate_trace_inner(
    trace: &SimTrace,
    backbone: Option<&HotspotGraph>,
    requests: &[DeliveryRequest],
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let by_id: BTreeMap<u32, &DeliveryRequest> = requests.iter().map(|r| (r.id, r)).collect();

    // assignment: every request exactly once in outcomes
    let mut outcome_ids: Vec<u32> = trace.outcomes.iter().map(|o| o.request_id).collect();
    outcome_ids.sort_unstable();
    outcome_ids.dedup();
    if outcome_ids.len() != trace.outcomes.len() {
        report.add(ViolationKind::Assignment, "duplicate request ids in outcomes".into());
    }
    if outcome_ids.len() != requests.len()
        || requests.iter().any(|r| outcome_ids.binary_search(&r.id).is_err())
    {
        report.add(
            ViolationKind::Assignment,
            format!("outcomes cover {} of {} requests", outcome_ids.len(), requests.len()),
        );
    }

    let vehicle_by_id: BTreeMap<u32, &VehicleLog> =
        trace.vehicles.iter().map(|v| (v.id, v)).collect();

    for o in &trace.outcomes {
        let Some(r) = by_id.get(&o.request_id) else {
            report.add(
                ViolationKind::Assignment,
                format!("outcome for unknown request {}", o.request_id),
            );
            continue;
        };
        if o.completed {
            let (Some(vid), Some(picked), Some(delivered)) =
                (o.vehicle, o.pickup_time_s, o.delivered_time_s)
            else {
                report.add(
                    ViolationKind::Assignment,
                    format!("request {}: completed without vehicle or times", o.request_id),
                );
                continue;
            };
            let Some(v) = vehicle_by_id.get(&vid) else {
                report.add(
                    ViolationKind::Assignment,
                    format!("request {}: unknown vehicle {vid}", o.request_id),
                );
                continue;
            };
            // precedence: the request rides a contiguous run of legs from its
            // pickup hotspot to its dropoff hotspot
            let legs: Vec<usize> = v
                .leg_loads
                .iter()
                .enumerate()
                .filter(|(_, load)| load.contains(&o.request_id))
                .map(|(i, _)| i)
                .collect();
            let contiguous = legs.windows(2).all(|w| w[1] == w[0] + 1);
            let endpoints_ok = match (legs.first(), legs.last()) {
                (Some(&first), Some(&last)) => {
                    v.route[first] == r.pickup && v.route[last + 1] == r.dropoff
                }
                _ => false,
            };
            if !contiguous || !endpoints_ok {
                report.add(
                    ViolationKind::Precedence,
                    format!(
                        "request {}: pickup {} must precede dropoff {} on vehicle {} route {:?}",
                        o.request_id, r.pickup, r.dropoff, vid, v.route
                    ),
                );
            } else {
                let first = legs[0];
                let last = *legs.last().unwrap();
                if (v.arrival_times_s[first] - picked).abs() > TIMING_TOLERANCE_S
                    || (v.arrival_times_s[last + 1] - delivered).abs() > TIMING_TOLERANCE_S
                {
                    report.add(
                        ViolationKind::Timing,
                        format!(
                            "request {}: recorded pickup/dropoff times disagree with vehicle route times",
                            o.request_id
                        ),
                    );
                }
            }
            let expect_success = picked >= r.earliest_pickup_s && delivered <= r.deadline_s;
            if o.success != expect_success {
                report.add(
                    ViolationKind::Success,
                    format!(
                        "request {}: success flag {} but picked up at {picked:.3} (visible {:.3}) and delivered at {delivered:.3} (deadline {:.3})",
                        o.request_id, o.success, r.earliest_pickup_s, r.deadline_s
                    ),
                );
            }
        } else if o.success {
            report.add(
                ViolationKind::Success,
                format!("request {}: successful but not completed", o.request_id),
            );
        }
    }

    for v in &trace.vehicles {
        if v.route.len() != v.arrival_times_s.len()
            || v.leg_loads.len() + 1 != v.route.len()
            || v.leg_distance_km.len() != v.leg_loads.len()
        {
            report.add(ViolationKind::Timing, format!("vehicle {}: inconsistent log lengths", v.id));
            continue;
        }
        let mut recomputed = v.arrival_times_s[0];
        for i in 0..v.leg_loads.len() {
            let (a, b) = (v.route[i], v.route[i + 1]);
            if v.leg_loads[i].len() > trace.capacity as usize {
                report.add(
                    ViolationKind::Capacity,
                    format!(
                        "vehicle {}: leg {a}->{b} carries {} requests over capacity {}",
                        v.id,
                        v.leg_loads[i].len(),
                        trace.capacity
                    ),
                );
            }
            match backbone.map(|g| g.edge_between(a, b)) {
                Some(None) => {
                    report.add(
                        ViolationKind::EdgeFeasibility,
                        format!("vehicle {}: leg {a}->{b} is not a backbone edge", v.id),
                    );
                    // resync so one bad leg does not cascade into timing noise
                    recomputed = v.arrival_times_s[i + 1];
                }
                Some(Some(e)) => {
                    if (v.leg_distance_km[i] - e.distance_km).abs() > 1e-9 {
                        report.add(
                            ViolationKind::EdgeFeasibility,
                            format!(
                                "vehicle {}: leg {a}->{b} distance {} != edge {}",
                                v.id, v.leg_distance_km[i], e.distance_km
                            ),
                        );
                    }
                    recomputed += e.travel_time_s;
                    if (v.arrival_times_s[i + 1] - recomputed).abs() > TIMING_TOLERANCE_S {
                        report.add(
                            ViolationKind::Timing,
                            format!(
                                "vehicle {}: arrival at {b} recorded {} but travel-time sum gives {recomputed}",
                                v.id, v.arrival_times_s[i + 1]
                            ),
                        );
                        recomputed = v.arrival_times_s[i + 1];
                    }
                    if v.arrival_times_s[i + 1] <= v.arrival_times_s[i] {
                        report.add(
                            ViolationKind::Timing,
                            format!("vehicle {}: arrival times not strictly increasing at {b}", v.id),
                        );
                    }
                }
                None => {
                    if v.arrival_times_s[i + 1] <= v.arrival_times_s[i] {
                        report.add(
                            ViolationKind::Timing,
                            format!("vehicle {}: arrival times not strictly increasing at {b}", v.id),
                        );
                    }
                }
            }
        }
    }
    report
}
