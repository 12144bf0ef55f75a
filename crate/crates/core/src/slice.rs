//! Slice provisioning: request intake, embedding onto the topology using
//! monitor statistics, INC program selection and placement, rule/extern
//! installation through the adapter, lifecycle state, and the per-step
//! creation-time ledger.
//!
//! Slice creation runs five steps in order: validate the request, collect a
//! statistics snapshot, embed, and — only for INC-enabled slices — select the
//! program from the catalog and place it on on-path switches. Placement
//! rewires the already-installed forwarding entries into transcode actions,
//! mirroring a control plane that first creates the slice and then enables
//! INC on top of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::dataplane::{
    transcode_size, Action, ExternRef, ExternSpec, MatchKey, SliceTag, TableEntry, SLICE_TAG_BASE,
};
use crate::monitor::{
    Ack, Adapter, AdapterBackend, AdapterError, Command, Monitor, NetworkState, StatsSnapshot,
};
use crate::net::{ChannelId, NodeId, PathSpec, Topology};
use crate::sim::RelaySpec;
use crate::time::{ns_from_ms, Nanos};

/// Packet size used to derive a packet rate from a requested bandwidth when
/// charging extern CPU cost.
pub const DEFAULT_RATE_MTU: u32 = 1500;

pub const STEP_VALIDATE: &str = "validate_request";
pub const STEP_STATS: &str = "collect_stats";
pub const STEP_EMBED: &str = "embed_slice";
pub const STEP_SELECT: &str = "select_inc_program";
pub const STEP_PLACE: &str = "place_inc_program";

/// Where to put the INC program relative to the embedded paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum PlacementStrategy {
    /// First switch common to all paths from the source.
    NearSource,
    /// Last switch before each destination.
    NearAudience,
    /// Operator-chosen switches, verified on-path.
    Explicit { nodes: Vec<NodeId> },
    /// Single switch minimizing total link bytes by static accounting.
    GreedyMinLoad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRequest {
    pub bandwidth_bps: u64,
    pub latency_bound_s: f64,
    pub max_attendees: u32,
    pub attendee_locations: Vec<NodeId>,
    pub source: NodeId,
    pub inc_enabled: bool,
    #[serde(default)]
    pub inc_function: Option<String>,
    #[serde(default = "default_placement")]
    pub placement: PlacementStrategy,
}

fn default_placement() -> PlacementStrategy {
    PlacementStrategy::GreedyMinLoad
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SliceUpdate {
    #[serde(default)]
    pub bandwidth_bps: Option<u64>,
    #[serde(default)]
    pub attendee_locations: Option<Vec<NodeId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceId(pub u64);

impl fmt::Display for SliceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceState {
    Designed,
    Active,
    Decommissioned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreationStep {
    pub name: String,
    pub cost_ns: Nanos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub from: NodeId,
    pub to: NodeId,
    pub bps: u64,
}

impl Reservation {
    pub fn channel(&self) -> ChannelId {
        ChannelId::new(self.from.clone(), self.to.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub node: NodeId,
    pub extern_ref: ExternRef,
    /// Destinations whose copies are transcoded at this switch.
    pub covers: Vec<NodeId>,
}

/// Extra steering leg routing the stream through a relay node before its
/// embedded paths (used by the edge-transcoding arrangements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringLeg {
    pub relay: NodeId,
    pub path: PathSpec,
    pub ratio: f64,
    pub per_packet_delay_ns: Nanos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub slice_id: SliceId,
    pub tag: SliceTag,
    pub state: SliceState,
    pub paths: BTreeMap<NodeId, PathSpec>,
    pub reserved: Vec<Reservation>,
    pub placements: Vec<Placement>,
    #[serde(default)]
    pub steering: Option<SteeringLeg>,
    pub creation_steps: Vec<CreationStep>,
    pub request: SliceRequest,
}

impl SliceRecord {
    pub fn creation_time(&self) -> Nanos {
        self.creation_steps.iter().map(|s| s.cost_ns).sum()
    }
}

/// Per-step simulated base costs of the creation procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCosts {
    pub validate_ns: Nanos,
    pub collect_stats_ns: Nanos,
    pub embed_ns: Nanos,
    pub select_ns: Nanos,
    pub place_ns: Nanos,
}

impl Default for StepCosts {
    fn default() -> Self {
        StepCosts {
            validate_ns: ns_from_ms(20.0),
            collect_stats_ns: ns_from_ms(60.0),
            embed_ns: ns_from_ms(100.0),
            select_ns: ns_from_ms(20.0),
            place_ns: ns_from_ms(45.0),
        }
    }
}

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unknown slice {0}")]
    UnknownSlice(SliceId),
    #[error("slice {0} is not active")]
    NotActive(SliceId),
    #[error("embedding infeasible: no admissible path to {dst} at {bandwidth_bps} bps")]
    InfeasibleEmbedding { dst: NodeId, bandwidth_bps: u64 },
    #[error(transparent)]
    UnknownProgram(CatalogError),
    #[error("no feasible placement: {0}")]
    NoFeasiblePlacement(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("slice tag space exhausted")]
    TagsExhausted,
}

/// Packets per second offered by one stream copy of `bandwidth_bps`.
pub fn packet_rate(bandwidth_bps: u64) -> f64 {
    bandwidth_bps as f64 / (8.0 * DEFAULT_RATE_MTU as f64)
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

/// Embedded paths per destination plus the channel reservations they need.
pub type Embedding = (BTreeMap<NodeId, PathSpec>, Vec<(ChannelId, u64)>);

/// Greedy per-destination minimum-hop embedding under residual capacity.
///
/// Channels already reserved by this slice are free for further destinations
/// (multicast-style accounting: a shared prefix reserves the bandwidth once).
pub fn embed(
    request: &SliceRequest,
    topology: &Topology,
    stats: &StatsSnapshot,
) -> Result<Embedding, SliceError> {
    let bandwidth = request.bandwidth_bps;
    let mut residual: BTreeMap<ChannelId, u64> = topology
        .channels()
        .map(|(channel, props)| {
            let reserved = stats.reserved_bps(&channel.from, &channel.to);
            (channel.clone(), props.capacity_bps.saturating_sub(reserved))
        })
        .collect();

    let mut paths = BTreeMap::new();
    let mut reservations = Vec::new();
    let mut own: BTreeSet<ChannelId> = BTreeSet::new();
    for dst in &request.attendee_locations {
        let path = crate::net::shortest_path_where(topology, &request.source, dst, |channel| {
            own.contains(channel) || residual.get(channel).copied().unwrap_or(0) >= bandwidth
        })
        .map_err(|_| SliceError::InfeasibleEmbedding {
            dst: dst.clone(),
            bandwidth_bps: bandwidth,
        })?;
        for channel in path.channels() {
            if own.insert(channel.clone()) {
                let r = residual.get_mut(&channel).expect("channel exists");
                *r -= bandwidth;
                reservations.push((channel, bandwidth));
            }
        }
        paths.insert(dst.clone(), path);
    }
    Ok((paths, reservations))
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

/// Assignment of destinations to the switch transcoding their copies.
pub type PlacementPlan = Vec<(NodeId, Vec<NodeId>)>;

fn switch_sequence(path: &PathSpec, topology: &Topology) -> Vec<NodeId> {
    path.switches(topology).cloned().collect()
}

fn cpu_headroom_ok(
    net: &NetworkState,
    switch: &NodeId,
    spec: &ExternSpec,
    offered_pps: f64,
) -> bool {
    net.switch(switch)
        .map(|s| spec.cpu_cost * offered_pps <= s.cpu_capacity() - s.cpu_used())
        .unwrap_or(false)
}

/// Per-channel byte totals under a given transcode assignment, for one
/// full-size unit packet per destination. Used to rank placement candidates.
pub fn static_route_bytes(
    paths: &BTreeMap<NodeId, PathSpec>,
    full_size: u32,
    scaled_size: u32,
    transcode_at: &BTreeMap<NodeId, NodeId>,
) -> BTreeMap<ChannelId, u64> {
    let mut bytes: BTreeMap<ChannelId, u64> = BTreeMap::new();
    for (dst, path) in paths {
        let point = transcode_at.get(dst);
        let mut size = full_size;
        for pair in path.hops.windows(2) {
            if Some(&pair[0]) == point {
                size = scaled_size;
            }
            *bytes
                .entry(ChannelId::new(pair[0].clone(), pair[1].clone()))
                .or_default() += size as u64;
        }
    }
    bytes
}

/// Decide where the INC program runs.
pub fn place_inc(
    strategy: &PlacementStrategy,
    paths: &BTreeMap<NodeId, PathSpec>,
    net: &NetworkState,
    spec: &ExternSpec,
    pps_per_copy: f64,
) -> Result<PlacementPlan, SliceError> {
    let topology = net.topology();
    match strategy {
        PlacementStrategy::NearSource => {
            let mut iter = paths.values();
            let Some(first) = iter.next() else {
                return Err(SliceError::NoFeasiblePlacement("no embedded paths".into()));
            };
            let switch_sets: Vec<BTreeSet<NodeId>> = paths
                .values()
                .map(|p| switch_sequence(p, topology).into_iter().collect())
                .collect();
            let common = switch_sequence(first, topology)
                .into_iter()
                .find(|s| switch_sets.iter().all(|set| set.contains(s)));
            let Some(switch) = common else {
                return Err(SliceError::NoFeasiblePlacement(
                    "no switch common to all paths".into(),
                ));
            };
            let covers: Vec<NodeId> = paths.keys().cloned().collect();
            let offered = pps_per_copy * covers.len() as f64;
            if !cpu_headroom_ok(net, &switch, spec, offered) {
                return Err(SliceError::NoFeasiblePlacement(format!(
                    "switch {switch} lacks cpu headroom"
                )));
            }
            Ok(vec![(switch, covers)])
        }
        PlacementStrategy::NearAudience => {
            let mut by_switch: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
            for (dst, path) in paths {
                let last = switch_sequence(path, topology).into_iter().next_back();
                let Some(switch) = last else {
                    return Err(SliceError::NoFeasiblePlacement(format!(
                        "no switch on the path to {dst}"
                    )));
                };
                by_switch.entry(switch).or_default().push(dst.clone());
            }
            for (switch, covers) in &by_switch {
                let offered = pps_per_copy * covers.len() as f64;
                if !cpu_headroom_ok(net, switch, spec, offered) {
                    return Err(SliceError::NoFeasiblePlacement(format!(
                        "switch {switch} lacks cpu headroom"
                    )));
                }
            }
            Ok(by_switch.into_iter().collect())
        }
        PlacementStrategy::Explicit { nodes } => {
            if nodes.is_empty() {
                return Err(SliceError::NoFeasiblePlacement(
                    "explicit placement names no switches".into(),
                ));
            }
            for node in nodes {
                if !topology.is_switch(node) {
                    return Err(SliceError::NoFeasiblePlacement(format!(
                        "{node} is not a programmable switch"
                    )));
                }
            }
            let chosen: BTreeSet<&NodeId> = nodes.iter().collect();
            let mut by_switch: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
            for (dst, path) in paths {
                // A path meeting several explicit switches transcodes at the
                // first one; a single transcode point per stream path.
                if let Some(switch) = switch_sequence(path, topology)
                    .into_iter()
                    .find(|s| chosen.contains(s))
                {
                    by_switch.entry(switch).or_default().push(dst.clone());
                }
            }
            for node in nodes {
                if !by_switch.contains_key(node) {
                    return Err(SliceError::NoFeasiblePlacement(format!(
                        "{node} is not on any embedded path"
                    )));
                }
            }
            for (switch, covers) in &by_switch {
                let offered = pps_per_copy * covers.len() as f64;
                if !cpu_headroom_ok(net, switch, spec, offered) {
                    return Err(SliceError::NoFeasiblePlacement(format!(
                        "switch {switch} lacks cpu headroom"
                    )));
                }
            }
            Ok(by_switch.into_iter().collect())
        }
        PlacementStrategy::GreedyMinLoad => {
            let scaled = transcode_size(DEFAULT_RATE_MTU, spec.ratio);
            let mut candidates: BTreeSet<NodeId> = BTreeSet::new();
            for path in paths.values() {
                candidates.extend(switch_sequence(path, topology));
            }
            let mut best: Option<(u64, NodeId, Vec<NodeId>)> = None;
            for candidate in candidates {
                let covers: Vec<NodeId> = paths
                    .iter()
                    .filter(|(_, p)| p.hops.contains(&candidate))
                    .map(|(dst, _)| dst.clone())
                    .collect();
                let offered = pps_per_copy * covers.len() as f64;
                if !cpu_headroom_ok(net, &candidate, spec, offered) {
                    continue;
                }
                let assignment: BTreeMap<NodeId, NodeId> = covers
                    .iter()
                    .map(|dst| (dst.clone(), candidate.clone()))
                    .collect();
                let total: u64 = static_route_bytes(paths, DEFAULT_RATE_MTU, scaled, &assignment)
                    .values()
                    .sum();
                // Candidates arrive in lexicographic order; strict comparison
                // keeps the smallest id on ties.
                if best.as_ref().map(|(b, _, _)| total < *b).unwrap_or(true) {
                    best = Some((total, candidate, covers));
                }
            }
            match best {
                Some((_, switch, covers)) => Ok(vec![(switch, covers)]),
                None => Err(SliceError::NoFeasiblePlacement(
                    "no on-path switch with cpu headroom".into(),
                )),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Serialized-writer control plane owning the network state and slice ledger.
#[derive(Debug, Clone)]
pub struct SliceEngine {
    net: NetworkState,
    adapter: Adapter,
    monitor: Monitor,
    catalog: Catalog,
    step_costs: StepCosts,
    slices: BTreeMap<SliceId, SliceRecord>,
    next_slice: u64,
}

impl SliceEngine {
    pub fn new(topology: Topology, catalog: Catalog, backend: AdapterBackend) -> Self {
        SliceEngine {
            net: NetworkState::new(topology),
            adapter: Adapter::new(backend),
            monitor: Monitor::new(),
            catalog,
            step_costs: StepCosts::default(),
            slices: BTreeMap::new(),
            next_slice: 1,
        }
    }

    pub fn with_step_costs(mut self, step_costs: StepCosts) -> Self {
        self.step_costs = step_costs;
        self
    }

    pub fn network(&self) -> &NetworkState {
        &self.net
    }

    pub fn adapter(&self) -> &Adapter {
        &self.adapter
    }

    pub fn set_backend_available(&mut self, available: bool) {
        self.adapter.set_available(available);
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn get_slice(&self, id: SliceId) -> Option<&SliceRecord> {
        self.slices.get(&id)
    }

    pub fn list_slices(&self) -> impl Iterator<Item = &SliceRecord> {
        self.slices.values()
    }

    /// Latest statistics snapshot (advances the monitor epoch).
    pub fn collect_stats(&mut self) -> Result<StatsSnapshot, AdapterError> {
        self.monitor.collect(&self.adapter, &self.net)
    }

    /// Fold per-channel byte totals from a finished run into the monitor
    /// counters.
    pub fn record_carried(&mut self, bytes: &BTreeMap<ChannelId, u64>) {
        self.net.record_carried(bytes);
    }

    fn allocate_tag(&self) -> Result<SliceTag, SliceError> {
        let active: BTreeSet<u16> = self
            .slices
            .values()
            .filter(|r| r.state == SliceState::Active)
            .map(|r| r.tag.0)
            .collect();
        (SLICE_TAG_BASE..=u16::MAX)
            .find(|t| !active.contains(t))
            .map(SliceTag)
            .ok_or(SliceError::TagsExhausted)
    }

    fn validate_request(&self, request: &SliceRequest) -> Result<(), SliceError> {
        let topology = self.net.topology();
        if request.bandwidth_bps == 0 {
            return Err(SliceError::InvalidRequest(
                "bandwidth must be positive".into(),
            ));
        }
        if request.latency_bound_s <= 0.0 {
            return Err(SliceError::InvalidRequest(
                "latency bound must be positive".into(),
            ));
        }
        if request.attendee_locations.is_empty() {
            return Err(SliceError::InvalidRequest("no attendee locations".into()));
        }
        if request.attendee_locations.len() > request.max_attendees as usize {
            return Err(SliceError::InvalidRequest(format!(
                "{} attendees exceed the declared maximum {}",
                request.attendee_locations.len(),
                request.max_attendees
            )));
        }
        if !topology.contains(&request.source) {
            return Err(SliceError::InvalidRequest(format!(
                "unknown source {}",
                request.source
            )));
        }
        for dst in &request.attendee_locations {
            if !topology.contains(dst) {
                return Err(SliceError::InvalidRequest(format!(
                    "unknown attendee {dst}"
                )));
            }
        }
        if request.inc_enabled && request.inc_function.is_none() {
            return Err(SliceError::InvalidRequest(
                "inc_enabled requires an inc_function".into(),
            ));
        }
        if let PlacementStrategy::Explicit { nodes } = &request.placement {
            for node in nodes {
                if !topology.is_switch(node) {
                    return Err(SliceError::InvalidRequest(format!(
                        "explicit placement node {node} is not a programmable switch"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Forwarding entries along every embedded path.
    fn forwarding_entries(
        &self,
        tag: SliceTag,
        paths: &BTreeMap<NodeId, PathSpec>,
    ) -> Vec<(NodeId, TableEntry)> {
        let topology = self.net.topology();
        let mut out = Vec::new();
        for (dst, path) in paths {
            for pair in path.hops.windows(2) {
                if topology.is_switch(&pair[0]) {
                    out.push((
                        pair[0].clone(),
                        TableEntry {
                            key: MatchKey {
                                tag,
                                dst: dst.clone(),
                            },
                            action: Action::Forward {
                                next_hop: pair[1].clone(),
                            },
                        },
                    ));
                }
            }
        }
        out
    }

    /// Create, activate, and remember a slice. All-or-nothing: on any error
    /// the network state is left untouched.
    pub fn create_slice(&mut self, request: SliceRequest) -> Result<SliceRecord, SliceError> {
        let mut steps = Vec::new();

        // (1) Validate the request.
        self.validate_request(&request)?;
        steps.push(CreationStep {
            name: STEP_VALIDATE.into(),
            cost_ns: self.step_costs.validate_ns,
        });

        // (2) Collect statistics through the adapter.
        let stats = self.monitor.collect(&self.adapter, &self.net)?;
        steps.push(CreationStep {
            name: STEP_STATS.into(),
            cost_ns: self.step_costs.collect_stats_ns + self.adapter.command_cost(),
        });

        let tag = self.allocate_tag()?;
        let slice_id = SliceId(self.next_slice);

        // Steps 3-5 mutate a working copy, swapped in only on success.
        let mut work = self.net.clone();
        let (paths, reservations, placements, tail_steps) =
            self.provision(&mut work, &request, tag, &stats)?;
        steps.extend(tail_steps);

        self.net = work;
        self.next_slice += 1;
        let record = SliceRecord {
            slice_id,
            tag,
            state: SliceState::Active,
            paths,
            reserved: reservations
                .into_iter()
                .map(|(channel, bps)| Reservation {
                    from: channel.from,
                    to: channel.to,
                    bps,
                })
                .collect(),
            placements,
            steering: None,
            creation_steps: steps,
            request,
        };
        self.slices.insert(slice_id, record.clone());
        Ok(record)
    }

    /// Steps 3-5 against `work`: embed, install forwarding, then (if INC)
    /// select and place, rewiring entries at the placement switches.
    #[allow(clippy::type_complexity)]
    fn provision(
        &self,
        work: &mut NetworkState,
        request: &SliceRequest,
        tag: SliceTag,
        stats: &StatsSnapshot,
    ) -> Result<
        (
            BTreeMap<NodeId, PathSpec>,
            Vec<(ChannelId, u64)>,
            Vec<Placement>,
            Vec<CreationStep>,
        ),
        SliceError,
    > {
        let mut steps = Vec::new();

        // (3) Embed and install forwarding state.
        let (paths, reservations) = embed(request, work.topology(), stats)?;
        for (channel, bps) in &reservations {
            work.reserve(channel, *bps)
                .map_err(|_| SliceError::InfeasibleEmbedding {
                    dst: channel.to.clone(),
                    bandwidth_bps: *bps,
                })?;
        }
        let mut embed_cost = self.step_costs.embed_ns;
        for (node, entry) in self.forwarding_entries(tag, &paths) {
            self.adapter
                .apply(work, Command::InstallEntry { node, entry })?;
            embed_cost += self.adapter.command_cost();
        }
        steps.push(CreationStep {
            name: STEP_EMBED.into(),
            cost_ns: embed_cost,
        });

        // (4) + (5) INC enabling on top of the created slice.
        let mut placements = Vec::new();
        if request.inc_enabled {
            let name = request.inc_function.as_deref().unwrap_or_default();
            let spec = self
                .catalog
                .select(name)
                .map_err(SliceError::UnknownProgram)?
                .clone();
            steps.push(CreationStep {
                name: STEP_SELECT.into(),
                cost_ns: self.step_costs.select_ns,
            });

            let pps = packet_rate(request.bandwidth_bps);
            let plan = place_inc(&request.placement, &paths, work, &spec, pps)?;
            let mut place_cost = self.step_costs.place_ns;
            for (switch, covers) in plan {
                let offered = pps * covers.len() as f64;
                let ack = self.adapter.apply(
                    work,
                    Command::InstallExtern {
                        node: switch.clone(),
                        spec: spec.clone(),
                        offered_pps: offered,
                    },
                )?;
                place_cost += self.adapter.command_cost();
                let Ack::ExternInstalled(extern_ref) = ack else {
                    unreachable!("extern install acknowledges with a reference")
                };
                for dst in &covers {
                    let key = MatchKey {
                        tag,
                        dst: dst.clone(),
                    };
                    let next_hop = match work.switch(&switch).and_then(|s| s.lookup(&key)) {
                        Some(Action::Forward { next_hop }) => next_hop.clone(),
                        _ => {
                            return Err(SliceError::NoFeasiblePlacement(format!(
                                "no forwarding entry for {dst} at {switch}"
                            )))
                        }
                    };
                    self.adapter.apply(
                        work,
                        Command::RemoveEntry {
                            node: switch.clone(),
                            key: key.clone(),
                        },
                    )?;
                    self.adapter.apply(
                        work,
                        Command::InstallEntry {
                            node: switch.clone(),
                            entry: TableEntry {
                                key,
                                action: Action::TranscodeThenForward {
                                    extern_ref,
                                    next_hop,
                                },
                            },
                        },
                    )?;
                    place_cost += 2 * self.adapter.command_cost();
                }
                placements.push(Placement {
                    node: switch,
                    extern_ref,
                    covers,
                });
            }
            steps.push(CreationStep {
                name: STEP_PLACE.into(),
                cost_ns: place_cost,
            });
        }

        Ok((paths, reservations, placements, steps))
    }

    /// Remove a slice's footprint from `work`.
    fn teardown_on(&self, work: &mut NetworkState, record: &SliceRecord) -> Result<(), SliceError> {
        let topology = work.topology().clone();
        // Entries along embedded paths.
        for (dst, path) in &record.paths {
            for hop in path.hops.iter().filter(|h| topology.is_switch(h)) {
                self.adapter.apply(
                    work,
                    Command::RemoveEntry {
                        node: hop.clone(),
                        key: MatchKey {
                            tag: record.tag,
                            dst: dst.clone(),
                        },
                    },
                )?;
            }
        }
        // Steering-leg entries and relay registration.
        if let Some(steering) = &record.steering {
            for hop in steering.path.hops.iter().filter(|h| topology.is_switch(h)) {
                self.adapter.apply(
                    work,
                    Command::RemoveEntry {
                        node: hop.clone(),
                        key: MatchKey {
                            tag: record.tag,
                            dst: steering.relay.clone(),
                        },
                    },
                )?;
            }
            work.remove_relay(&steering.relay, record.tag);
        }
        // Externs.
        for placement in &record.placements {
            self.adapter.apply(
                work,
                Command::RemoveExtern {
                    node: placement.node.clone(),
                    extern_ref: placement.extern_ref,
                },
            )?;
        }
        // Bandwidth.
        for reservation in &record.reserved {
            work.release(&reservation.channel(), reservation.bps);
        }
        Ok(())
    }

    /// Re-embed and re-place an active slice with changed bandwidth or
    /// attendees. All-or-nothing: an infeasible update leaves the original.
    pub fn update_slice(
        &mut self,
        id: SliceId,
        update: SliceUpdate,
    ) -> Result<SliceRecord, SliceError> {
        let old = self
            .slices
            .get(&id)
            .ok_or(SliceError::UnknownSlice(id))?
            .clone();
        if old.state != SliceState::Active {
            return Err(SliceError::NotActive(id));
        }
        let mut request = old.request.clone();
        if let Some(bw) = update.bandwidth_bps {
            request.bandwidth_bps = bw;
        }
        if let Some(attendees) = update.attendee_locations {
            request.attendee_locations = attendees;
        }
        self.validate_request(&request)?;

        let mut work = self.net.clone();
        self.teardown_on(&mut work, &old)?;
        let stats = self.adapter.collect(&work, self.monitor.epoch())?;
        let (paths, reservations, placements, _steps) =
            self.provision(&mut work, &request, old.tag, &stats)?;

        self.net = work;
        let record = SliceRecord {
            slice_id: id,
            tag: old.tag,
            state: SliceState::Active,
            paths,
            reserved: reservations
                .into_iter()
                .map(|(channel, bps)| Reservation {
                    from: channel.from,
                    to: channel.to,
                    bps,
                })
                .collect(),
            placements,
            steering: None,
            creation_steps: old.creation_steps,
            request,
        };
        self.slices.insert(id, record.clone());
        Ok(record)
    }

    /// Release all resources of an active slice and decommission it.
    pub fn delete_slice(&mut self, id: SliceId) -> Result<SliceRecord, SliceError> {
        let record = self
            .slices
            .get(&id)
            .ok_or(SliceError::UnknownSlice(id))?
            .clone();
        if record.state != SliceState::Active {
            return Err(SliceError::NotActive(id));
        }
        let mut work = self.net.clone();
        self.teardown_on(&mut work, &record)?;
        self.net = work;
        let record = self.slices.get_mut(&id).expect("checked above");
        record.state = SliceState::Decommissioned;
        record.reserved.clear();
        Ok(record.clone())
    }

    /// Send the slice through a relay first: install steering entries along
    /// `leg`, reserve its channels, and register the relay behavior. The leg
    /// becomes part of the slice and is torn down with it.
    pub(crate) fn install_relay_leg(
        &mut self,
        id: SliceId,
        leg: PathSpec,
        ratio: f64,
        per_packet_delay: Nanos,
    ) -> Result<SliceRecord, SliceError> {
        let record = self
            .slices
            .get(&id)
            .ok_or(SliceError::UnknownSlice(id))?
            .clone();
        if record.state != SliceState::Active {
            return Err(SliceError::NotActive(id));
        }
        let relay = leg
            .hops
            .last()
            .ok_or_else(|| SliceError::InvalidRequest("empty steering leg".into()))?
            .clone();
        let mut work = self.net.clone();
        let topology = work.topology().clone();
        topology
            .validate_path(&leg)
            .map_err(|e| SliceError::InvalidRequest(format!("bad steering leg: {e}")))?;

        let next_hop = leg.hops[leg.hops.len() - 2].clone();
        // Reserve the leg plus the relay's return hop onto the embedded
        // paths, skipping channels this slice already holds (the shared
        // prefix reserves once, like the embedding itself).
        let mut held: BTreeSet<ChannelId> =
            record.reserved.iter().map(Reservation::channel).collect();
        let mut wanted: Vec<ChannelId> = leg.channels().collect();
        wanted.push(ChannelId::new(relay.clone(), next_hop.clone()));
        let mut added = Vec::new();
        for channel in wanted {
            if !held.insert(channel.clone()) {
                continue;
            }
            work.reserve(&channel, record.request.bandwidth_bps)
                .map_err(|_| SliceError::InfeasibleEmbedding {
                    dst: relay.clone(),
                    bandwidth_bps: record.request.bandwidth_bps,
                })?;
            added.push(Reservation {
                from: channel.from,
                to: channel.to,
                bps: record.request.bandwidth_bps,
            });
        }
        for pair in leg.hops.windows(2) {
            if topology.is_switch(&pair[0]) {
                self.adapter.apply(
                    &mut work,
                    Command::InstallEntry {
                        node: pair[0].clone(),
                        entry: TableEntry {
                            key: MatchKey {
                                tag: record.tag,
                                dst: relay.clone(),
                            },
                            action: Action::Forward {
                                next_hop: pair[1].clone(),
                            },
                        },
                    },
                )?;
            }
        }
        work.set_relay(
            relay.clone(),
            record.tag,
            RelaySpec {
                ratio,
                per_packet_delay,
                next_hop,
            },
        );

        self.net = work;
        let record = self.slices.get_mut(&id).expect("checked above");
        record.reserved.extend(added);
        record.steering = Some(SteeringLeg {
            relay,
            path: leg,
            ratio,
            per_packet_delay_ns: per_packet_delay,
        });
        Ok(record.clone())
    }
}
