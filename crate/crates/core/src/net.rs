//! Infrastructure model: nodes, links, routing and capacity queries.
//!
//! A [`Topology`] is immutable once loaded. Every physical link is modeled as
//! two independent directed channels, each at the full configured capacity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{ns_from_ms, Nanos};

/// Default one-way propagation delay when a link omits `prop_delay_ms`.
pub const DEFAULT_PROP_DELAY_MS: f64 = 0.5;
/// Default compute capacity for a switch when the config omits it.
pub const DEFAULT_SWITCH_CPU: f64 = 100.0;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

/// What a node is able to do in the simulated infrastructure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Programmable switch able to host match/action tables and externs.
    Switch { cpu_capacity: f64 },
    /// Audience endpoint; terminates streams.
    Host,
    /// Compute server at the network edge; relays and transcodes streams.
    EdgeServer { proc_delay: Nanos },
    /// Stream origin.
    StreamingServer,
}

impl NodeKind {
    pub fn is_switch(&self) -> bool {
        matches!(self, NodeKind::Switch { .. })
    }
}

/// One directed channel of a link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelId {
    pub from: NodeId,
    pub to: NodeId,
}

impl ChannelId {
    pub fn new(from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        ChannelId {
            from: from.into(),
            to: to.into(),
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Transmission properties of one directed channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelProps {
    pub capacity_bps: u64,
    pub prop_delay: Nanos,
}

/// An undirected link as declared in the config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub capacity_bps: u64,
    pub prop_delay: Nanos,
}

/// A simple path through the topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub hops: Vec<NodeId>,
}

impl PathSpec {
    pub fn new(hops: Vec<NodeId>) -> Self {
        PathSpec { hops }
    }

    /// The directed channels this path crosses, in order.
    pub fn channels(&self) -> impl Iterator<Item = ChannelId> + '_ {
        self.hops
            .windows(2)
            .map(|w| ChannelId::new(w[0].clone(), w[1].clone()))
    }

    /// The switch hops of this path, in order.
    pub fn switches<'a>(&'a self, topology: &'a Topology) -> impl Iterator<Item = &'a NodeId> {
        self.hops.iter().filter(|n| {
            topology
                .node_kind(n)
                .map(NodeKind::is_switch)
                .unwrap_or(false)
        })
    }
}

impl fmt::Display for PathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for hop in &self.hops {
            if !first {
                f.write_str("-")?;
            }
            first = false;
            write!(f, "{hop}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config read error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty node id")]
    EmptyNodeId,
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("switch {0} must have positive cpu capacity")]
    NonPositiveCpu(NodeId),
    #[error("negative proc delay on node {0}")]
    NegativeProcDelay(NodeId),
    #[error("link {a}-{b} references undeclared node {missing}")]
    DanglingEndpoint {
        a: NodeId,
        b: NodeId,
        missing: NodeId,
    },
    #[error("link {a}-{b} must have positive capacity")]
    NonPositiveCapacity { a: NodeId, b: NodeId },
    #[error("link {a}-{b} has negative propagation delay")]
    NegativeDelay { a: NodeId, b: NodeId },
    #[error("self link on {0}")]
    SelfLink(NodeId),
    #[error("path repeats node {0}")]
    RepeatedHop(NodeId),
    #[error("duplicate link {a}-{b}")]
    DuplicateLink { a: NodeId, b: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("unknown channel {0}")]
    UnknownChannel(ChannelId),
    #[error("reservations on {channel} total {requested} bps, capacity {capacity} bps")]
    OverReserved {
        channel: ChannelId,
        capacity: u64,
        requested: u64,
    },
}

// ---------------------------------------------------------------------------
// Config file schema
// ---------------------------------------------------------------------------

fn default_schema_version() -> u32 {
    1
}

/// On-disk topology description (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Free-form provenance notes carried by the config file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub nodes: Vec<NodeConfig>,
    pub links: Vec<LinkConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    pub kind: NodeKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpu_capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proc_delay_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindConfig {
    Switch,
    Host,
    EdgeServer,
    StreamingServer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub capacity_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop_delay_ms: Option<f64>,
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// The physical infrastructure graph. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: BTreeMap<NodeId, NodeKind>,
    links: Vec<Link>,
    channels: BTreeMap<ChannelId, ChannelProps>,
    neighbors: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Topology {
    pub fn from_config(config: &TopologyConfig) -> Result<Self, TopologyError> {
        let mut nodes = BTreeMap::new();
        for nc in &config.nodes {
            if nc.id.is_empty() {
                return Err(TopologyError::EmptyNodeId);
            }
            let id = NodeId::new(nc.id.clone());
            let kind = match nc.kind {
                NodeKindConfig::Switch => {
                    let cpu = nc.cpu_capacity.unwrap_or(DEFAULT_SWITCH_CPU);
                    if cpu <= 0.0 {
                        return Err(TopologyError::NonPositiveCpu(id));
                    }
                    NodeKind::Switch { cpu_capacity: cpu }
                }
                NodeKindConfig::Host => NodeKind::Host,
                NodeKindConfig::EdgeServer => {
                    let ms = nc.proc_delay_ms.unwrap_or(0.0);
                    if ms < 0.0 {
                        return Err(TopologyError::NegativeProcDelay(id));
                    }
                    NodeKind::EdgeServer {
                        proc_delay: ns_from_ms(ms),
                    }
                }
                NodeKindConfig::StreamingServer => NodeKind::StreamingServer,
            };
            if nodes.insert(id.clone(), kind).is_some() {
                return Err(TopologyError::DuplicateNode(id));
            }
        }

        let mut links = Vec::new();
        let mut seen = BTreeSet::new();
        for lc in &config.links {
            let a = NodeId::new(lc.a.clone());
            let b = NodeId::new(lc.b.clone());
            if a == b {
                return Err(TopologyError::SelfLink(a));
            }
            for end in [&a, &b] {
                if !nodes.contains_key(end) {
                    return Err(TopologyError::DanglingEndpoint {
                        a: a.clone(),
                        b: b.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if lc.capacity_mbps <= 0.0 {
                return Err(TopologyError::NonPositiveCapacity { a, b });
            }
            let prop_ms = lc.prop_delay_ms.unwrap_or(DEFAULT_PROP_DELAY_MS);
            if prop_ms < 0.0 {
                return Err(TopologyError::NegativeDelay { a, b });
            }
            let key = if a < b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            };
            if !seen.insert(key) {
                return Err(TopologyError::DuplicateLink { a, b });
            }
            links.push(Link {
                a,
                b,
                capacity_bps: (lc.capacity_mbps * 1e6).round() as u64,
                prop_delay: ns_from_ms(prop_ms),
            });
        }

        let mut channels = BTreeMap::new();
        let mut neighbors: BTreeMap<NodeId, Vec<NodeId>> =
            nodes.keys().map(|n| (n.clone(), Vec::new())).collect();
        for link in &links {
            let props = ChannelProps {
                capacity_bps: link.capacity_bps,
                prop_delay: link.prop_delay,
            };
            channels.insert(ChannelId::new(link.a.clone(), link.b.clone()), props);
            channels.insert(ChannelId::new(link.b.clone(), link.a.clone()), props);
            neighbors.get_mut(&link.a).unwrap().push(link.b.clone());
            neighbors.get_mut(&link.b).unwrap().push(link.a.clone());
        }
        for nbrs in neighbors.values_mut() {
            nbrs.sort();
        }

        Ok(Topology {
            nodes,
            links,
            channels,
            neighbors,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, TopologyError> {
        let config: TopologyConfig = serde_json::from_str(text)?;
        Self::from_config(&config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// The canonical eleven-switch evaluation network shipped in-repo.
    pub fn canonical() -> Self {
        Self::from_json_str(include_str!("../data/fig3.topo"))
            .expect("bundled canonical topology is valid")
    }

    pub fn node_kind(&self, id: &NodeId) -> Option<&NodeKind> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn is_switch(&self, id: &NodeId) -> bool {
        self.node_kind(id).map(NodeKind::is_switch).unwrap_or(false)
    }

    pub fn is_host(&self, id: &NodeId) -> bool {
        matches!(self.node_kind(id), Some(NodeKind::Host))
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &NodeKind)> {
        self.nodes.iter()
    }

    pub fn switches(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes
            .iter()
            .filter(|(_, k)| k.is_switch())
            .map(|(n, _)| n)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn channel(&self, id: &ChannelId) -> Option<&ChannelProps> {
        self.channels.get(id)
    }

    pub fn channels(&self) -> impl Iterator<Item = (&ChannelId, &ChannelProps)> {
        self.channels.iter()
    }

    pub fn neighbors(&self, id: &NodeId) -> &[NodeId] {
        self.neighbors.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Directed channels qualifying for the network-load metric: links between
    /// infrastructure nodes. Host attachments are excluded.
    pub fn load_bearing_channels(&self) -> impl Iterator<Item = (&ChannelId, &ChannelProps)> {
        self.channels
            .iter()
            .filter(|(c, _)| !self.is_host(&c.from) && !self.is_host(&c.to))
    }

    /// Check that `path` is a simple path whose consecutive hops are adjacent.
    pub fn validate_path(&self, path: &PathSpec) -> Result<(), TopologyError> {
        let mut seen = BTreeSet::new();
        for hop in &path.hops {
            if !self.contains(hop) {
                return Err(TopologyError::UnknownNode(hop.clone()));
            }
            if !seen.insert(hop.clone()) {
                return Err(TopologyError::RepeatedHop(hop.clone()));
            }
        }
        for ch in path.channels() {
            if self.channel(&ch).is_none() {
                return Err(TopologyError::UnknownChannel(ch));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Routing and capacity queries
// ---------------------------------------------------------------------------

/// Minimum-hop simple path from `src` to `dst`.
///
/// Among equal-length paths the lexicographically smallest hop sequence wins,
/// so repeated calls return identical routes.
pub fn shortest_path(
    topology: &Topology,
    src: &NodeId,
    dst: &NodeId,
) -> Result<PathSpec, TopologyError> {
    shortest_path_where(topology, src, dst, |_| true)
}

/// Like [`shortest_path`] but restricted to channels accepted by `admissible`.
pub fn shortest_path_where(
    topology: &Topology,
    src: &NodeId,
    dst: &NodeId,
    admissible: impl Fn(&ChannelId) -> bool,
) -> Result<PathSpec, TopologyError> {
    for id in [src, dst] {
        if !topology.contains(id) {
            return Err(TopologyError::UnknownNode(id.clone()));
        }
    }
    if src == dst {
        return Ok(PathSpec::new(vec![src.clone()]));
    }

    // Hop distance to `dst` over admissible forward channels.
    let mut dist: BTreeMap<&NodeId, u32> = BTreeMap::new();
    dist.insert(dst, 0);
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        for u in topology.neighbors(v) {
            if dist.contains_key(u) {
                continue;
            }
            if admissible(&ChannelId::new(u.clone(), v.clone())) {
                dist.insert(u, d + 1);
                queue.push_back(u);
            }
        }
    }

    let Some(&total) = dist.get(src) else {
        return Err(TopologyError::NoPath {
            src: src.clone(),
            dst: dst.clone(),
        });
    };

    // Walk downhill choosing the smallest next hop; neighbors are pre-sorted,
    // which makes the full hop sequence lexicographically minimal.
    let mut hops = Vec::with_capacity(total as usize + 1);
    let mut cur = src;
    hops.push(cur.clone());
    let mut remaining = total;
    while cur != dst {
        let next = topology
            .neighbors(cur)
            .iter()
            .find(|n| {
                dist.get(*n) == Some(&(remaining - 1))
                    && admissible(&ChannelId::new(cur.clone(), (*n).clone()))
            })
            .expect("BFS distance map always yields a downhill neighbor");
        hops.push(next.clone());
        cur = next;
        remaining -= 1;
    }
    Ok(PathSpec::new(hops))
}

/// Remaining capacity per directed channel after applying `reservations`.
///
/// Over-reservation is an error, never clamped.
pub fn residual_bandwidth(
    topology: &Topology,
    reservations: &[(ChannelId, u64)],
) -> Result<BTreeMap<ChannelId, u64>, TopologyError> {
    let mut reserved: BTreeMap<ChannelId, u64> = BTreeMap::new();
    for (channel, bps) in reservations {
        if topology.channel(channel).is_none() {
            return Err(TopologyError::UnknownChannel(channel.clone()));
        }
        *reserved.entry(channel.clone()).or_default() += bps;
    }
    let mut residual = BTreeMap::new();
    for (channel, props) in topology.channels() {
        let used = reserved.get(channel).copied().unwrap_or(0);
        if used > props.capacity_bps {
            return Err(TopologyError::OverReserved {
                channel: channel.clone(),
                capacity: props.capacity_bps,
                requested: used,
            });
        }
        residual.insert(channel.clone(), props.capacity_bps - used);
    }
    Ok(residual)
}
