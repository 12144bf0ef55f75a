//! Programmable-switch emulation: match/action tables keyed on the slice tag,
//! forwarding actions, and pluggable extern compute functions with per-switch
//! CPU accounting.
//!
//! A table matches on `(tag, address)`. Slice isolation falls out of the key:
//! entries installed for one slice can never match traffic tagged for another.

use std::fmt;
use std::sync::Arc;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::NodeId;
use crate::time::Nanos;

/// First Ethertype value handed out to slices. Values grow upward from here
/// and are never shared by two active slices.
pub const SLICE_TAG_BASE: u16 = 0x88B5;

/// Ethertype value tagging every packet of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SliceTag(pub u16);

impl fmt::Display for SliceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04X}", self.0)
    }
}

/// A simulated packet.
///
/// `dst` is the final destination and never changes. `via` is an optional
/// steering address: while set, switches match on it instead of `dst`, and the
/// named relay node consumes it. This is how a stream is sent through an edge
/// server that sits off the direct path.
#[derive(Debug, Clone)]
pub struct Packet {
    pub tag: SliceTag,
    pub stream_id: Arc<str>,
    pub seq: u64,
    pub size: u32,
    pub created_at: Nanos,
    pub dst: NodeId,
    pub via: Option<NodeId>,
    /// Arrival stamps, appended at every node the packet reaches.
    pub provenance: Vec<(NodeId, Nanos)>,
}

impl Packet {
    /// The address switch tables match on.
    pub fn routing_address(&self) -> &NodeId {
        self.via.as_ref().unwrap_or(&self.dst)
    }
}

/// Table match key: one entry per `(tag, address)` per switch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchKey {
    pub tag: SliceTag,
    pub dst: NodeId,
}

/// Reference to an extern instance installed on one switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExternRef(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Forward {
        next_hop: NodeId,
    },
    TranscodeThenForward {
        extern_ref: ExternRef,
        next_hop: NodeId,
    },
    Drop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub key: MatchKey,
    pub action: Action,
}

/// An in-switch compute function.
///
/// `cpu_cost` is charged per packet-per-second of offered rate at install
/// time, so hosting a function for a faster stream consumes more of the
/// switch's compute budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternSpec {
    pub name: String,
    /// Output size over input size, in (0, 1].
    pub ratio: f64,
    pub per_packet_delay: Nanos,
    pub cpu_cost: f64,
}

impl ExternSpec {
    fn validate(&self) -> Result<(), DataplaneError> {
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(DataplaneError::InvalidExtern {
                name: self.name.clone(),
                reason: format!("ratio {} outside (0, 1]", self.ratio),
            });
        }
        if self.cpu_cost < 0.0 {
            return Err(DataplaneError::InvalidExtern {
                name: self.name.clone(),
                reason: format!("negative cpu cost {}", self.cpu_cost),
            });
        }
        Ok(())
    }
}

/// Size of a packet after transcoding: `ceil(size * ratio)`, never zero.
///
/// The ratio is applied at parts-per-million precision so that e.g.
/// 1500 B at ratio 0.4 is exactly 600 B despite the binary representation
/// of 0.4.
pub fn transcode_size(size: u32, ratio: f64) -> u32 {
    const PPM: u64 = 1_000_000;
    let ratio_ppm = (ratio * PPM as f64).round() as u64;
    let scaled = (size as u64 * ratio_ppm).div_ceil(PPM);
    scaled.max(1) as u32
}

#[derive(Debug, Error)]
pub enum DataplaneError {
    #[error("switch {node}: duplicate entry for tag {tag} dst {dst}")]
    DuplicateEntry {
        node: NodeId,
        tag: SliceTag,
        dst: NodeId,
    },
    #[error("switch {node}: action references unregistered extern {extern_ref:?}")]
    UnknownExtern { node: NodeId, extern_ref: ExternRef },
    #[error("switch {node}: extern needs {needed:.3} cpu units, {available:.3} available")]
    InsufficientCpu {
        node: NodeId,
        needed: f64,
        available: f64,
    },
    #[error("invalid extern {name}: {reason}")]
    InvalidExtern { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
struct ExternInstance {
    spec: ExternSpec,
    committed_cpu: f64,
}

/// Mutable per-switch state: the match/action table, installed externs and
/// the compute ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchState {
    node: NodeId,
    table: BTreeMap<MatchKey, Action>,
    externs: BTreeMap<ExternRef, ExternInstance>,
    next_extern: u32,
    cpu_capacity: f64,
    cpu_used: f64,
    pipeline_delay: Nanos,
}

impl SwitchState {
    pub fn new(node: NodeId, cpu_capacity: f64) -> Self {
        SwitchState {
            node,
            table: BTreeMap::new(),
            externs: BTreeMap::new(),
            next_extern: 0,
            cpu_capacity,
            cpu_used: 0.0,
            pipeline_delay: 0,
        }
    }

    pub fn with_pipeline_delay(mut self, delay: Nanos) -> Self {
        self.pipeline_delay = delay;
        self
    }

    pub fn node(&self) -> &NodeId {
        &self.node
    }

    pub fn cpu_capacity(&self) -> f64 {
        self.cpu_capacity
    }

    pub fn cpu_used(&self) -> f64 {
        self.cpu_used
    }

    pub fn pipeline_delay(&self) -> Nanos {
        self.pipeline_delay
    }

    pub fn entries(&self) -> impl Iterator<Item = TableEntry> + '_ {
        self.table.iter().map(|(key, action)| TableEntry {
            key: key.clone(),
            action: action.clone(),
        })
    }

    pub fn lookup(&self, key: &MatchKey) -> Option<&Action> {
        self.table.get(key)
    }

    pub fn extern_spec(&self, extern_ref: ExternRef) -> Option<&ExternSpec> {
        self.externs.get(&extern_ref).map(|i| &i.spec)
    }

    /// Install a table entry. At most one entry per `(tag, dst)`.
    pub fn install_entry(&mut self, entry: TableEntry) -> Result<(), DataplaneError> {
        if let Action::TranscodeThenForward { extern_ref, .. } = &entry.action {
            if !self.externs.contains_key(extern_ref) {
                return Err(DataplaneError::UnknownExtern {
                    node: self.node.clone(),
                    extern_ref: *extern_ref,
                });
            }
        }
        if self.table.contains_key(&entry.key) {
            return Err(DataplaneError::DuplicateEntry {
                node: self.node.clone(),
                tag: entry.key.tag,
                dst: entry.key.dst.clone(),
            });
        }
        self.table.insert(entry.key, entry.action);
        Ok(())
    }

    /// Remove an entry; returns whether one was present (idempotent).
    pub fn remove_entry(&mut self, key: &MatchKey) -> bool {
        self.table.remove(key).is_some()
    }

    /// Register an extern, committing `cpu_cost * offered_pps` compute units.
    pub fn install_extern(
        &mut self,
        spec: ExternSpec,
        offered_pps: f64,
    ) -> Result<ExternRef, DataplaneError> {
        spec.validate()?;
        let needed = spec.cpu_cost * offered_pps;
        let available = self.cpu_capacity - self.cpu_used;
        if needed > available {
            return Err(DataplaneError::InsufficientCpu {
                node: self.node.clone(),
                needed,
                available,
            });
        }
        let extern_ref = ExternRef(self.next_extern);
        self.next_extern += 1;
        self.cpu_used += needed;
        self.externs.insert(
            extern_ref,
            ExternInstance {
                spec,
                committed_cpu: needed,
            },
        );
        Ok(extern_ref)
    }

    /// Remove an extern and release its compute units (idempotent).
    pub fn remove_extern(&mut self, extern_ref: ExternRef) -> bool {
        match self.externs.remove(&extern_ref) {
            Some(instance) => {
                self.cpu_used -= instance.committed_cpu;
                true
            }
            None => false,
        }
    }

    /// Run one packet through the pipeline.
    ///
    /// Returns the outgoing packets with their next hop and the processing
    /// delay incurred inside this switch. An empty result means the packet was
    /// dropped (no match, an explicit drop action, or a dangling extern).
    pub fn process(&self, packet: Packet) -> Vec<(Packet, NodeId, Nanos)> {
        let key = MatchKey {
            tag: packet.tag,
            dst: packet.routing_address().clone(),
        };
        match self.table.get(&key) {
            Some(Action::Forward { next_hop }) => {
                vec![(packet, next_hop.clone(), self.pipeline_delay)]
            }
            Some(Action::TranscodeThenForward {
                extern_ref,
                next_hop,
            }) => {
                let Some(instance) = self.externs.get(extern_ref) else {
                    return vec![];
                };
                let mut out = packet;
                out.size = transcode_size(out.size, instance.spec.ratio);
                let delay = self.pipeline_delay + instance.spec.per_packet_delay;
                vec![(out, next_hop.clone(), delay)]
            }
            Some(Action::Drop) | None => vec![],
        }
    }
}
