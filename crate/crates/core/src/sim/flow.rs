//! Stream workload description and frame-to-packet mapping.

use std::sync::Arc;

use thiserror::Error;

use crate::dataplane::{Packet, SliceTag};
use crate::net::NodeId;
use crate::time::Nanos;

/// One holographic stream: a fixed-rate frame source replicated to an ordered
/// set of destinations.
#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub stream_id: String,
    pub source: NodeId,
    /// Replication order: for every packet, the copy for `destinations[0]` is
    /// put on the wire before the copy for `destinations[1]`, and so on.
    pub destinations: Vec<NodeId>,
    pub frame_count: u32,
    pub frame_size: u32,
    pub frame_interval: Nanos,
    pub mtu: u32,
    pub tag: SliceTag,
    /// Steer every packet through this relay before its final destination.
    pub via: Option<NodeId>,
    /// Next hop from the source; defaults to its only neighbor.
    pub first_hop: Option<NodeId>,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow {0}: destination list is empty")]
    NoDestinations(String),
    #[error("flow {0}: frame_count must be at least 1")]
    ZeroFrames(String),
    #[error("flow {0}: frame_size must be at least 1 byte")]
    ZeroFrameSize(String),
    #[error("flow {0}: mtu {1} is below the 64-byte minimum")]
    MtuTooSmall(String, u32),
    #[error("flow {0}: frame_interval must be positive")]
    ZeroInterval(String),
}

impl FlowSpec {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.destinations.is_empty() {
            return Err(FlowError::NoDestinations(self.stream_id.clone()));
        }
        if self.frame_count < 1 {
            return Err(FlowError::ZeroFrames(self.stream_id.clone()));
        }
        if self.frame_size < 1 {
            return Err(FlowError::ZeroFrameSize(self.stream_id.clone()));
        }
        if self.mtu < 64 {
            return Err(FlowError::MtuTooSmall(self.stream_id.clone(), self.mtu));
        }
        if self.frame_interval == 0 {
            return Err(FlowError::ZeroInterval(self.stream_id.clone()));
        }
        Ok(())
    }

    pub fn packets_per_frame(&self) -> u32 {
        self.frame_size.div_ceil(self.mtu)
    }

    /// Injection time of frame `index`.
    pub fn frame_time(&self, index: u32) -> Nanos {
        index as Nanos * self.frame_interval
    }

    /// Total stream span from first to last frame injection.
    pub fn stream_span(&self) -> Nanos {
        self.frame_time(self.frame_count - 1)
    }
}

/// Split every frame into MTU-sized packets, one copy per destination.
///
/// Copies are interleaved per packet index: packet k for the first
/// destination precedes packet k for the second. The last packet of a frame
/// carries the remainder. Sequence numbers increase per (stream, destination).
pub fn packetize(flow: &FlowSpec) -> Result<Vec<Vec<Packet>>, FlowError> {
    flow.validate()?;
    let stream_id: Arc<str> = Arc::from(flow.stream_id.as_str());
    let ppf = flow.packets_per_frame();
    let mut frames = Vec::with_capacity(flow.frame_count as usize);
    for frame in 0..flow.frame_count {
        let created_at = flow.frame_time(frame);
        let mut packets = Vec::with_capacity((ppf as usize) * flow.destinations.len());
        for k in 0..ppf {
            let size = if k + 1 == ppf {
                flow.frame_size - flow.mtu * (ppf - 1)
            } else {
                flow.mtu
            };
            for dst in &flow.destinations {
                packets.push(Packet {
                    tag: flow.tag,
                    stream_id: Arc::clone(&stream_id),
                    seq: frame as u64 * ppf as u64 + k as u64,
                    size,
                    created_at,
                    dst: dst.clone(),
                    via: flow.via.clone(),
                    provenance: Vec::new(),
                });
            }
        }
        frames.push(packets);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(frame_size: u32, mtu: u32, destinations: Vec<NodeId>) -> FlowSpec {
        FlowSpec {
            stream_id: "holo".into(),
            source: "streamsrv".into(),
            destinations,
            frame_count: 2,
            frame_size,
            frame_interval: 33_333_333,
            mtu,
            tag: SliceTag(0x88B5),
            via: None,
            first_hop: None,
        }
    }

    #[test]
    fn full_frames_split_evenly() {
        let frames = packetize(&flow(9000, 1500, vec!["host1".into()])).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].len(), 6);
        assert!(frames[0].iter().all(|p| p.size == 1500));
        let seqs: Vec<u64> = frames.iter().flatten().map(|p| p.seq).collect();
        assert_eq!(seqs, (0..12).collect::<Vec<u64>>());
    }

    #[test]
    fn small_frame_is_a_single_packet() {
        let frames = packetize(&flow(100, 1500, vec!["host1".into()])).unwrap();
        assert_eq!(frames[0].len(), 1);
        assert_eq!(frames[0][0].size, 100);
    }

    #[test]
    fn last_packet_carries_remainder() {
        let frames = packetize(&flow(9001, 1500, vec!["host1".into()])).unwrap();
        assert_eq!(frames[0].len(), 7);
        assert_eq!(frames[0][6].size, 1);
    }

    #[test]
    fn copies_interleave_per_packet_index() {
        let frames = packetize(&flow(3000, 1500, vec!["host1".into(), "host2".into()])).unwrap();
        let order: Vec<(u64, &str)> = frames[0].iter().map(|p| (p.seq, p.dst.as_str())).collect();
        assert_eq!(
            order,
            vec![(0, "host1"), (0, "host2"), (1, "host1"), (1, "host2")]
        );
    }

    #[test]
    fn empty_destination_list_rejected() {
        assert!(matches!(
            packetize(&flow(9000, 1500, vec![])),
            Err(FlowError::NoDestinations(_))
        ));
    }

    #[test]
    fn tiny_mtu_rejected() {
        assert!(matches!(
            packetize(&flow(9000, 32, vec!["host1".into()])),
            Err(FlowError::MtuTooSmall(_, 32))
        ));
    }
}
