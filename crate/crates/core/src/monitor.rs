//! Live network state, the resource-utilization monitor, and the adapter
//! layer.
//!
//! The adapter offers one interface for collecting statistics and installing
//! rules whether the backend talks to an SDN controller or to the device
//! directly; the two backends differ only in per-command latency cost, which
//! feeds slice-creation-time accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::{
    DataplaneError, ExternRef, ExternSpec, MatchKey, SliceTag, SwitchState, TableEntry,
};
use crate::net::{ChannelId, NodeId, NodeKind, Topology, TopologyError};
use crate::sim::RelaySpec;
use crate::time::{ns_from_ms, Nanos};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Everything the control plane can observe and mutate: switch states, the
/// bandwidth reservation ledger, relay configuration, and carried-byte
/// counters fed back from simulation runs.
#[derive(Debug, Clone)]
pub struct NetworkState {
    topology: Topology,
    switches: BTreeMap<NodeId, SwitchState>,
    reservations: BTreeMap<ChannelId, u64>,
    relays: BTreeMap<(NodeId, SliceTag), RelaySpec>,
    carried: BTreeMap<ChannelId, u64>,
}

impl NetworkState {
    pub fn new(topology: Topology) -> Self {
        let switches = topology
            .nodes()
            .filter_map(|(id, kind)| match kind {
                NodeKind::Switch { cpu_capacity } => {
                    Some((id.clone(), SwitchState::new(id.clone(), *cpu_capacity)))
                }
                _ => None,
            })
            .collect();
        NetworkState {
            topology,
            switches,
            reservations: BTreeMap::new(),
            relays: BTreeMap::new(),
            carried: BTreeMap::new(),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn switches(&self) -> &BTreeMap<NodeId, SwitchState> {
        &self.switches
    }

    pub fn switch(&self, id: &NodeId) -> Option<&SwitchState> {
        self.switches.get(id)
    }

    pub(crate) fn switch_mut(&mut self, id: &NodeId) -> Option<&mut SwitchState> {
        self.switches.get_mut(id)
    }

    pub fn relays(&self) -> &BTreeMap<(NodeId, SliceTag), RelaySpec> {
        &self.relays
    }

    pub fn set_relay(&mut self, node: NodeId, tag: SliceTag, relay: RelaySpec) {
        self.relays.insert((node, tag), relay);
    }

    pub fn remove_relay(&mut self, node: &NodeId, tag: SliceTag) -> bool {
        self.relays.remove(&(node.clone(), tag)).is_some()
    }

    pub fn reservations(&self) -> &BTreeMap<ChannelId, u64> {
        &self.reservations
    }

    pub fn reserved(&self, channel: &ChannelId) -> u64 {
        self.reservations.get(channel).copied().unwrap_or(0)
    }

    /// Residual capacity of one channel.
    pub fn residual(&self, channel: &ChannelId) -> u64 {
        let capacity = self
            .topology
            .channel(channel)
            .map(|p| p.capacity_bps)
            .unwrap_or(0);
        capacity.saturating_sub(self.reserved(channel))
    }

    /// Commit bandwidth on a channel; rejects over-commitment.
    pub fn reserve(&mut self, channel: &ChannelId, bps: u64) -> Result<(), TopologyError> {
        let Some(props) = self.topology.channel(channel) else {
            return Err(TopologyError::UnknownChannel(channel.clone()));
        };
        let next = self.reserved(channel) + bps;
        if next > props.capacity_bps {
            return Err(TopologyError::OverReserved {
                channel: channel.clone(),
                capacity: props.capacity_bps,
                requested: next,
            });
        }
        self.reservations.insert(channel.clone(), next);
        Ok(())
    }

    /// Release previously committed bandwidth.
    pub fn release(&mut self, channel: &ChannelId, bps: u64) {
        if let Some(current) = self.reservations.get_mut(channel) {
            *current = current.saturating_sub(bps);
            if *current == 0 {
                self.reservations.remove(channel);
            }
        }
    }

    pub fn carried(&self) -> &BTreeMap<ChannelId, u64> {
        &self.carried
    }

    /// Fold a run's per-channel byte totals into the carried counters.
    pub fn record_carried(&mut self, bytes: &BTreeMap<ChannelId, u64>) {
        for (channel, b) in bytes {
            *self.carried.entry(channel.clone()).or_default() += b;
        }
    }
}

// ---------------------------------------------------------------------------
// Statistics snapshot
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStat {
    pub from: NodeId,
    pub to: NodeId,
    pub bytes_carried: u64,
    /// Reserved share of capacity, in [0, 1].
    pub utilization: f64,
    pub reserved_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchStat {
    pub node: NodeId,
    pub cpu_capacity: f64,
    pub cpu_used: f64,
}

/// Consistent view of the network at one quiescent point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub schema_version: u32,
    pub epoch: u64,
    pub link_stats: Vec<LinkStat>,
    pub switch_stats: Vec<SwitchStat>,
}

impl StatsSnapshot {
    /// Equality ignoring the epoch counter.
    pub fn content_equal(&self, other: &StatsSnapshot) -> bool {
        self.link_stats == other.link_stats && self.switch_stats == other.switch_stats
    }

    pub fn reserved_bps(&self, from: &NodeId, to: &NodeId) -> u64 {
        self.link_stats
            .iter()
            .find(|s| &s.from == from && &s.to == to)
            .map(|s| s.reserved_bps)
            .unwrap_or(0)
    }

    pub fn total_reserved(&self) -> u64 {
        self.link_stats.iter().map(|s| s.reserved_bps).sum()
    }
}

// ---------------------------------------------------------------------------
// Adapter
// ---------------------------------------------------------------------------

/// Where adapter commands land.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterBackend {
    /// Commands travel through an SDN controller.
    Controller,
    /// Commands go to the programmable device directly.
    DirectDevice,
}

impl AdapterBackend {
    /// Simulated latency charged per command, feeding creation-time ledgers.
    pub fn command_cost(&self) -> Nanos {
        match self {
            AdapterBackend::Controller => ns_from_ms(5.0),
            AdapterBackend::DirectDevice => ns_from_ms(1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Command {
    InstallEntry {
        node: NodeId,
        entry: TableEntry,
    },
    InstallExtern {
        node: NodeId,
        spec: ExternSpec,
        offered_pps: f64,
    },
    RemoveEntry {
        node: NodeId,
        key: MatchKey,
    },
    RemoveExtern {
        node: NodeId,
        extern_ref: ExternRef,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ack {
    EntryInstalled,
    ExternInstalled(ExternRef),
    /// Removals are idempotent; carries whether anything was removed.
    Removed(bool),
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("backend unavailable")]
    Unavailable,
    #[error("node {0} is not a programmable switch")]
    InvalidTarget(NodeId),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
}

/// Uniform command/statistics interface over a backend.
#[derive(Debug, Clone)]
pub struct Adapter {
    backend: AdapterBackend,
    available: bool,
}

impl Adapter {
    pub fn new(backend: AdapterBackend) -> Self {
        Adapter {
            backend,
            available: true,
        }
    }

    pub fn backend(&self) -> AdapterBackend {
        self.backend
    }

    pub fn command_cost(&self) -> Nanos {
        self.backend.command_cost()
    }

    /// Simulate backend outage (used to exercise unavailability paths).
    pub fn set_available(&mut self, available: bool) {
        self.available = available;
    }

    /// Execute one command against the data plane.
    pub fn apply(&self, net: &mut NetworkState, command: Command) -> Result<Ack, AdapterError> {
        if !self.available {
            return Err(AdapterError::Unavailable);
        }
        let node = match &command {
            Command::InstallEntry { node, .. }
            | Command::InstallExtern { node, .. }
            | Command::RemoveEntry { node, .. }
            | Command::RemoveExtern { node, .. } => node.clone(),
        };
        if !net.topology().is_switch(&node) {
            return Err(AdapterError::InvalidTarget(node));
        }
        let switch = net
            .switch_mut(&node)
            .ok_or(AdapterError::InvalidTarget(node))?;
        match command {
            Command::InstallEntry { entry, .. } => {
                switch.install_entry(entry)?;
                Ok(Ack::EntryInstalled)
            }
            Command::InstallExtern {
                spec, offered_pps, ..
            } => {
                let extern_ref = switch.install_extern(spec, offered_pps)?;
                Ok(Ack::ExternInstalled(extern_ref))
            }
            Command::RemoveEntry { key, .. } => Ok(Ack::Removed(switch.remove_entry(&key))),
            Command::RemoveExtern { extern_ref, .. } => {
                Ok(Ack::Removed(switch.remove_extern(extern_ref)))
            }
        }
    }

    /// Take a consistent statistics snapshot.
    pub fn collect(&self, net: &NetworkState, epoch: u64) -> Result<StatsSnapshot, AdapterError> {
        if !self.available {
            return Err(AdapterError::Unavailable);
        }
        let link_stats = net
            .topology()
            .channels()
            .map(|(channel, props)| {
                let reserved = net.reserved(channel);
                LinkStat {
                    from: channel.from.clone(),
                    to: channel.to.clone(),
                    bytes_carried: net.carried().get(channel).copied().unwrap_or(0),
                    utilization: reserved as f64 / props.capacity_bps as f64,
                    reserved_bps: reserved,
                }
            })
            .collect();
        let switch_stats = net
            .switches()
            .values()
            .map(|s| SwitchStat {
                node: s.node().clone(),
                cpu_capacity: s.cpu_capacity(),
                cpu_used: s.cpu_used(),
            })
            .collect();
        Ok(StatsSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            epoch,
            link_stats,
            switch_stats,
        })
    }
}

/// Epoch-stamped statistics collection.
#[derive(Debug, Clone, Default)]
pub struct Monitor {
    epoch: u64,
}

impl Monitor {
    pub fn new() -> Self {
        Monitor::default()
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn collect(
        &mut self,
        adapter: &Adapter,
        net: &NetworkState,
    ) -> Result<StatsSnapshot, AdapterError> {
        self.epoch += 1;
        adapter.collect(net, self.epoch)
    }
}
