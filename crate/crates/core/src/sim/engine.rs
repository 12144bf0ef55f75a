//! Deterministic discrete-event loop.
//!
//! Store-and-forward with one FIFO output queue per directed channel.
//! Events are processed in (time, insertion sequence) order, so identical
//! inputs produce bit-identical traces.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use thiserror::Error;

use crate::dataplane::{transcode_size, Packet, SliceTag, SwitchState};
use crate::net::{ChannelId, NodeId, NodeKind, Topology};
use crate::sim::flow::{packetize, FlowError, FlowSpec};
use crate::time::{serialization_ns, Nanos};

/// Transcode-and-relay behavior of an edge server, keyed by (node, tag).
///
/// The edge charges its own `proc_delay` plus `per_packet_delay` for every
/// relayed packet, then re-emits toward `next_hop` with the steering address
/// cleared.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaySpec {
    pub ratio: f64,
    pub per_packet_delay: Nanos,
    pub next_hop: NodeId,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub duration_limit: Nanos,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            // One simulated hour; every bundled workload finishes well inside.
            duration_limit: 3_600_000_000_000,
        }
    }
}

/// One traversed channel of a delivered (or dropped) packet, with the full
/// timing decomposition: `node_delay` was spent at `from` before the packet
/// became ready, `tx_start - ready_at` is queue wait, `tx_end - tx_start` is
/// serialization, `arrived_at - tx_end` is propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LegRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: u32,
    pub node_delay: Nanos,
    pub ready_at: Nanos,
    pub tx_start: Nanos,
    pub tx_end: Nanos,
    pub arrived_at: Nanos,
}

/// A delivered packet.
#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub tag: SliceTag,
    pub stream_id: std::sync::Arc<str>,
    pub dst: NodeId,
    pub seq: u64,
    pub sent_at: Nanos,
    pub received_at: Nanos,
    pub bytes_delivered: u32,
    pub legs: Vec<LegRecord>,
}

impl PacketRecord {
    pub fn latency(&self) -> Nanos {
        self.received_at - self.sent_at
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub records: Vec<PacketRecord>,
    pub per_tag: BTreeMap<SliceTag, TagCounts>,
    pub channel_bytes: BTreeMap<ChannelId, u64>,
    pub first_injection: Option<Nanos>,
    pub last_delivery: Option<Nanos>,
}

impl SimOutcome {
    pub fn injected(&self) -> u64 {
        self.per_tag.values().map(|c| c.injected).sum()
    }

    pub fn delivered(&self) -> u64 {
        self.per_tag.values().map(|c| c.delivered).sum()
    }

    pub fn dropped(&self) -> u64 {
        self.per_tag.values().map(|c| c.dropped).sum()
    }

    /// Span used by the network-load metric: last delivery minus first
    /// injection.
    pub fn span(&self) -> Nanos {
        match (self.first_injection, self.last_delivery) {
            (Some(first), Some(last)) => last.saturating_sub(first),
            _ => 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("flow {stream}: unknown source node {src}")]
    UnknownSource { stream: String, src: NodeId },
    #[error("flow {stream}: source {src} has {neighbors} neighbors; set an explicit first hop")]
    AmbiguousFirstHop {
        stream: String,
        src: NodeId,
        neighbors: usize,
    },
    #[error("flow {stream}: first hop {hop} is not adjacent to source {src}")]
    BadFirstHop {
        stream: String,
        src: NodeId,
        hop: NodeId,
    },
    #[error("forwarding references nonexistent channel {0}")]
    NoChannel(ChannelId),
    #[error("event loop still busy at the duration limit ({0} ns)")]
    DurationLimit(Nanos),
}

struct InFlight {
    packet: Packet,
    legs: Vec<LegRecord>,
}

enum EventKind {
    InjectFrame {
        flow: usize,
        frame: u32,
    },
    /// Packet finished node processing; hand it to the channel queue.
    Enqueue {
        channel: ChannelId,
        item: Box<InFlight>,
        node_delay: Nanos,
    },
    TxComplete {
        channel: ChannelId,
    },
    Arrival {
        node: NodeId,
        item: Box<InFlight>,
    },
}

struct Event {
    time: Nanos,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

#[derive(Default)]
struct ChannelRt {
    queue: VecDeque<InFlight>,
    transmitting: Option<InFlight>,
    bytes: u64,
}

struct Engine<'a> {
    topology: &'a Topology,
    switches: &'a BTreeMap<NodeId, SwitchState>,
    relays: &'a BTreeMap<(NodeId, SliceTag), RelaySpec>,
    frames: Vec<Vec<Vec<Packet>>>,
    first_hops: Vec<NodeId>,
    flows: &'a [FlowSpec],
    heap: BinaryHeap<Event>,
    next_seq: u64,
    channels: BTreeMap<ChannelId, ChannelRt>,
    outcome: SimOutcome,
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, time: Nanos, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    fn count_injected(&mut self, tag: SliceTag) {
        self.outcome.per_tag.entry(tag).or_default().injected += 1;
    }

    fn count_dropped(&mut self, tag: SliceTag) {
        self.outcome.per_tag.entry(tag).or_default().dropped += 1;
    }

    /// Hand a packet to a channel's output queue at `now`; `node_delay` is the
    /// processing time already spent at the channel's head node.
    fn enqueue(
        &mut self,
        channel: ChannelId,
        mut item: InFlight,
        now: Nanos,
        node_delay: Nanos,
    ) -> Result<(), SimError> {
        let Some(props) = self.topology.channel(&channel) else {
            return Err(SimError::NoChannel(channel));
        };
        item.legs.push(LegRecord {
            from: channel.from.clone(),
            to: channel.to.clone(),
            bytes: item.packet.size,
            node_delay,
            ready_at: now,
            tx_start: 0,
            tx_end: 0,
            arrived_at: 0,
        });
        let capacity = props.capacity_bps;
        let rt = self.channels.entry(channel.clone()).or_default();
        if rt.transmitting.is_none() {
            let tx_end = start_transmission(&mut item, now, capacity);
            rt.transmitting = Some(item);
            self.schedule(tx_end, EventKind::TxComplete { channel });
        } else {
            rt.queue.push_back(item);
        }
        Ok(())
    }

    fn on_inject(&mut self, flow_idx: usize, frame: u32, now: Nanos) -> Result<(), SimError> {
        let packets = std::mem::take(&mut self.frames[flow_idx][frame as usize]);
        let source = self.flows[flow_idx].source.clone();
        let first_hop = self.first_hops[flow_idx].clone();
        for mut packet in packets {
            self.count_injected(packet.tag);
            if self.outcome.first_injection.is_none() {
                self.outcome.first_injection = Some(now);
            }
            packet.provenance.push((source.clone(), now));
            let item = InFlight {
                packet,
                legs: Vec::new(),
            };
            self.enqueue(
                ChannelId::new(source.clone(), first_hop.clone()),
                item,
                now,
                0,
            )?;
        }
        Ok(())
    }

    fn on_tx_complete(&mut self, channel: ChannelId, now: Nanos) -> Result<(), SimError> {
        let prop = self
            .topology
            .channel(&channel)
            .map(|p| p.prop_delay)
            .unwrap_or(0);
        let capacity = self
            .topology
            .channel(&channel)
            .map(|p| p.capacity_bps)
            .unwrap_or(1);
        let rt = self.channels.get_mut(&channel).expect("channel exists");
        let mut done = rt
            .transmitting
            .take()
            .expect("tx completion without packet");
        rt.bytes += done.packet.size as u64;
        let leg = done.legs.last_mut().expect("leg opened at enqueue");
        debug_assert_eq!(leg.tx_end, now);
        leg.arrived_at = now + prop;

        if let Some(mut next) = rt.queue.pop_front() {
            let tx_end = start_transmission(&mut next, now, capacity);
            rt.transmitting = Some(next);
            self.schedule(
                tx_end,
                EventKind::TxComplete {
                    channel: channel.clone(),
                },
            );
        }

        let to = channel.to.clone();
        self.schedule(
            now + prop,
            EventKind::Arrival {
                node: to,
                item: Box::new(done),
            },
        );
        Ok(())
    }

    fn on_arrival(
        &mut self,
        node: NodeId,
        mut item: Box<InFlight>,
        now: Nanos,
    ) -> Result<(), SimError> {
        item.packet.provenance.push((node.clone(), now));
        match self.topology.node_kind(&node) {
            Some(NodeKind::Host) => {
                if item.packet.via.is_none() && item.packet.dst == node {
                    let tag = item.packet.tag;
                    self.outcome.per_tag.entry(tag).or_default().delivered += 1;
                    self.outcome.last_delivery = Some(now);
                    let InFlight { packet, legs } = *item;
                    self.outcome.records.push(PacketRecord {
                        tag: packet.tag,
                        stream_id: packet.stream_id,
                        dst: packet.dst,
                        seq: packet.seq,
                        sent_at: packet.created_at,
                        received_at: now,
                        bytes_delivered: packet.size,
                        legs,
                    });
                } else {
                    self.count_dropped(item.packet.tag);
                }
            }
            Some(NodeKind::Switch { .. }) => {
                let Some(switch) = self.switches.get(&node) else {
                    self.count_dropped(item.packet.tag);
                    return Ok(());
                };
                let tag = item.packet.tag;
                let legs = std::mem::take(&mut item.legs);
                let mut outputs = switch.process(item.packet);
                if outputs.is_empty() {
                    // No match for this slice at this switch, or explicit drop.
                    self.count_dropped(tag);
                } else {
                    let (packet, next_hop, delay) = outputs.remove(0);
                    let out = InFlight { packet, legs };
                    self.schedule(
                        now + delay,
                        EventKind::Enqueue {
                            channel: ChannelId::new(node, next_hop),
                            item: Box::new(out),
                            node_delay: delay,
                        },
                    );
                }
            }
            Some(NodeKind::EdgeServer { proc_delay }) => {
                let relay = self.relays.get(&(node.clone(), item.packet.tag)).cloned();
                match (relay, item.packet.via.clone()) {
                    (Some(relay), Some(via)) if via == node => {
                        item.packet.via = None;
                        item.packet.size = transcode_size(item.packet.size, relay.ratio);
                        let delay = proc_delay + relay.per_packet_delay;
                        self.schedule(
                            now + delay,
                            EventKind::Enqueue {
                                channel: ChannelId::new(node, relay.next_hop),
                                item,
                                node_delay: delay,
                            },
                        );
                    }
                    _ => self.count_dropped(item.packet.tag),
                }
            }
            Some(NodeKind::StreamingServer) | None => {
                self.count_dropped(item.packet.tag);
            }
        }
        Ok(())
    }
}

fn start_transmission(item: &mut InFlight, now: Nanos, capacity_bps: u64) -> Nanos {
    let leg = item.legs.last_mut().expect("leg opened at enqueue");
    leg.tx_start = now;
    leg.tx_end = now + serialization_ns(leg.bytes, capacity_bps);
    leg.tx_end
}

/// Run the event loop to completion.
pub fn run(
    topology: &Topology,
    switches: &BTreeMap<NodeId, SwitchState>,
    relays: &BTreeMap<(NodeId, SliceTag), RelaySpec>,
    flows: &[FlowSpec],
    config: &SimConfig,
) -> Result<SimOutcome, SimError> {
    let mut frames = Vec::with_capacity(flows.len());
    let mut first_hops = Vec::with_capacity(flows.len());
    for flow in flows {
        if !topology.contains(&flow.source) {
            return Err(SimError::UnknownSource {
                stream: flow.stream_id.clone(),
                src: flow.source.clone(),
            });
        }
        let first_hop = match &flow.first_hop {
            Some(hop) => {
                if !topology.neighbors(&flow.source).contains(hop) {
                    return Err(SimError::BadFirstHop {
                        stream: flow.stream_id.clone(),
                        src: flow.source.clone(),
                        hop: hop.clone(),
                    });
                }
                hop.clone()
            }
            None => {
                let neighbors = topology.neighbors(&flow.source);
                if neighbors.len() != 1 {
                    return Err(SimError::AmbiguousFirstHop {
                        stream: flow.stream_id.clone(),
                        src: flow.source.clone(),
                        neighbors: neighbors.len(),
                    });
                }
                neighbors[0].clone()
            }
        };
        first_hops.push(first_hop);
        frames.push(packetize(flow)?);
    }

    let mut engine = Engine {
        topology,
        switches,
        relays,
        frames,
        first_hops,
        flows,
        heap: BinaryHeap::new(),
        next_seq: 0,
        channels: BTreeMap::new(),
        outcome: SimOutcome {
            records: Vec::new(),
            per_tag: BTreeMap::new(),
            channel_bytes: BTreeMap::new(),
            first_injection: None,
            last_delivery: None,
        },
    };

    for (flow_idx, flow) in flows.iter().enumerate() {
        for frame in 0..flow.frame_count {
            let time = flow.frame_time(frame);
            engine.schedule(
                time,
                EventKind::InjectFrame {
                    flow: flow_idx,
                    frame,
                },
            );
        }
    }

    while let Some(event) = engine.heap.pop() {
        if event.time > config.duration_limit {
            return Err(SimError::DurationLimit(config.duration_limit));
        }
        match event.kind {
            EventKind::InjectFrame { flow, frame } => engine.on_inject(flow, frame, event.time)?,
            EventKind::Enqueue {
                channel,
                item,
                node_delay,
            } => engine.enqueue(channel, *item, event.time, node_delay)?,
            EventKind::TxComplete { channel } => engine.on_tx_complete(channel, event.time)?,
            EventKind::Arrival { node, item } => engine.on_arrival(node, item, event.time)?,
        }
    }

    engine.outcome.channel_bytes = engine
        .channels
        .iter()
        .filter(|(_, rt)| rt.bytes > 0)
        .map(|(c, rt)| (c.clone(), rt.bytes))
        .collect();
    Ok(engine.outcome)
}
