//! The three evaluation metrics and the per-run report.
//!
//! Latency is the mean packet transfer time per destination. Jitter is the
//! mean absolute latency variation between consecutive packets of one
//! destination. Network load is mean used bandwidth per link divided by mean
//! link bandwidth, over directed channels between infrastructure nodes (host
//! attachments excluded).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::SliceTag;
use crate::net::{ChannelId, NodeId, Topology};
use crate::sim::engine::{PacketRecord, SimOutcome};
use crate::time::{secs_f64, Nanos, NANOS_PER_SEC};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no delivered packets for destination {0}")]
    NoPackets(NodeId),
    #[error("need at least two delivered packets for destination {0}")]
    InsufficientPackets(NodeId),
    #[error("zero measurement span")]
    ZeroSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DstMetrics {
    pub avg_latency_s: f64,
    pub jitter_s: f64,
    pub delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagReport {
    pub tag: SliceTag,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkBytes {
    pub from: NodeId,
    pub to: NodeId,
    pub bytes: u64,
}

/// Aggregated results of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub per_dst: BTreeMap<NodeId, DstMetrics>,
    pub network_load: f64,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub per_tag: Vec<TagReport>,
    pub span_ns: Nanos,
    pub link_bytes: Vec<LinkBytes>,
}

fn latencies_by_seq(records: &[PacketRecord], dst: &NodeId) -> Vec<(u64, Nanos)> {
    let mut out: Vec<(u64, Nanos)> = records
        .iter()
        .filter(|r| &r.dst == dst)
        .map(|r| (r.seq, r.latency()))
        .collect();
    out.sort_by_key(|(seq, _)| *seq);
    out
}

/// Mean packet latency for `dst`, in seconds.
pub fn avg_latency(records: &[PacketRecord], dst: &NodeId) -> Result<f64, MetricsError> {
    let latencies = latencies_by_seq(records, dst);
    if latencies.is_empty() {
        return Err(MetricsError::NoPackets(dst.clone()));
    }
    let sum: u128 = latencies.iter().map(|(_, l)| *l as u128).sum();
    Ok(sum as f64 / latencies.len() as f64 / NANOS_PER_SEC as f64)
}

/// Mean absolute latency variation between consecutive packets of `dst`,
/// ordered by sequence number, in seconds.
pub fn jitter(records: &[PacketRecord], dst: &NodeId) -> Result<f64, MetricsError> {
    let latencies = latencies_by_seq(records, dst);
    if latencies.len() < 2 {
        return Err(MetricsError::InsufficientPackets(dst.clone()));
    }
    let sum: u128 = latencies
        .windows(2)
        .map(|w| w[1].1.abs_diff(w[0].1) as u128)
        .sum();
    Ok(sum as f64 / (latencies.len() - 1) as f64 / NANOS_PER_SEC as f64)
}

/// Per-channel byte totals folded from a delivered-packet trace.
pub fn channel_bytes_from_trace(records: &[PacketRecord]) -> BTreeMap<ChannelId, u64> {
    let mut bytes: BTreeMap<ChannelId, u64> = BTreeMap::new();
    for record in records {
        for leg in &record.legs {
            *bytes
                .entry(ChannelId::new(leg.from.clone(), leg.to.clone()))
                .or_default() += leg.bytes as u64;
        }
    }
    bytes
}

/// Network load of a trace over `span_ns`.
pub fn network_load(
    records: &[PacketRecord],
    topology: &Topology,
    span_ns: Nanos,
) -> Result<f64, MetricsError> {
    if span_ns == 0 {
        return Err(MetricsError::ZeroSpan);
    }
    let bytes = channel_bytes_from_trace(records);
    network_load_from_bytes(&bytes, topology, span_ns)
}

/// Network load from per-channel byte totals.
pub fn network_load_from_bytes(
    bytes: &BTreeMap<ChannelId, u64>,
    topology: &Topology,
    span_ns: Nanos,
) -> Result<f64, MetricsError> {
    if span_ns == 0 {
        return Err(MetricsError::ZeroSpan);
    }
    let span_s = secs_f64(span_ns);
    let mut used_bps_sum = 0.0;
    let mut capacity_sum = 0.0;
    for (channel, props) in topology.load_bearing_channels() {
        let carried = bytes.get(channel).copied().unwrap_or(0);
        used_bps_sum += carried as f64 * 8.0 / span_s;
        capacity_sum += props.capacity_bps as f64;
    }
    if capacity_sum == 0.0 {
        return Ok(0.0);
    }
    Ok(used_bps_sum / capacity_sum)
}

/// Build the full report for a finished run.
pub fn build_report(
    outcome: &SimOutcome,
    topology: &Topology,
) -> Result<MetricsReport, MetricsError> {
    let span = outcome.span();
    let mut per_dst = BTreeMap::new();
    let mut dsts: Vec<NodeId> = outcome.records.iter().map(|r| r.dst.clone()).collect();
    dsts.sort();
    dsts.dedup();
    for dst in dsts {
        let delivered = outcome.records.iter().filter(|r| r.dst == dst).count() as u64;
        let avg = avg_latency(&outcome.records, &dst)?;
        let jit = if delivered >= 2 {
            jitter(&outcome.records, &dst)?
        } else {
            0.0
        };
        per_dst.insert(
            dst,
            DstMetrics {
                avg_latency_s: avg,
                jitter_s: jit,
                delivered,
            },
        );
    }

    let network_load = if outcome.records.is_empty() {
        0.0
    } else {
        network_load(&outcome.records, topology, span)?
    };

    Ok(MetricsReport {
        schema_version: METRICS_SCHEMA_VERSION,
        per_dst,
        network_load,
        injected: outcome.injected(),
        delivered: outcome.delivered(),
        dropped: outcome.dropped(),
        per_tag: outcome
            .per_tag
            .iter()
            .map(|(tag, counts)| TagReport {
                tag: *tag,
                injected: counts.injected,
                delivered: counts.delivered,
                dropped: counts.dropped,
            })
            .collect(),
        span_ns: span,
        link_bytes: outcome
            .channel_bytes
            .iter()
            .map(|(channel, bytes)| LinkBytes {
                from: channel.from.clone(),
                to: channel.to.clone(),
                bytes: *bytes,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{NodeKindConfig, Topology, TopologyConfig};
    use crate::time::ns_from_ms;
    use std::sync::Arc;

    fn record(dst: &str, seq: u64, latency_ms: f64) -> PacketRecord {
        PacketRecord {
            tag: SliceTag(0x88B5),
            stream_id: Arc::from("s"),
            dst: dst.into(),
            seq,
            sent_at: 0,
            received_at: ns_from_ms(latency_ms),
            bytes_delivered: 1500,
            legs: vec![],
        }
    }

    #[test]
    fn avg_latency_is_arithmetic_mean() {
        let records = vec![record("h", 0, 10.0), record("h", 1, 20.0)];
        let avg = avg_latency(&records, &"h".into()).unwrap();
        assert!((avg - 0.015).abs() < 1e-12);
    }

    #[test]
    fn avg_latency_of_single_packet_is_itself() {
        let records = vec![record("h", 0, 7.5)];
        let avg = avg_latency(&records, &"h".into()).unwrap();
        assert!((avg - 0.0075).abs() < 1e-12);
    }

    #[test]
    fn avg_latency_without_packets_is_an_error() {
        assert!(matches!(
            avg_latency(&[], &"h".into()),
            Err(MetricsError::NoPackets(_))
        ));
    }

    #[test]
    fn jitter_means_consecutive_variation() {
        let records = vec![
            record("h", 0, 10.0),
            record("h", 1, 12.0),
            record("h", 2, 11.0),
        ];
        let j = jitter(&records, &"h".into()).unwrap();
        assert!((j - 0.0015).abs() < 1e-12, "expected 1.5 ms, got {j}");
    }

    #[test]
    fn jitter_of_constant_latencies_is_zero() {
        let records = vec![
            record("h", 0, 10.0),
            record("h", 1, 10.0),
            record("h", 2, 10.0),
        ];
        assert_eq!(jitter(&records, &"h".into()).unwrap(), 0.0);
    }

    #[test]
    fn jitter_orders_by_seq_not_delivery() {
        let records = vec![
            record("h", 2, 11.0),
            record("h", 0, 10.0),
            record("h", 1, 12.0),
        ];
        let j = jitter(&records, &"h".into()).unwrap();
        assert!((j - 0.0015).abs() < 1e-12);
    }

    #[test]
    fn jitter_needs_two_packets() {
        let records = vec![record("h", 0, 10.0)];
        assert!(matches!(
            jitter(&records, &"h".into()),
            Err(MetricsError::InsufficientPackets(_))
        ));
    }

    fn line_topology(n_switches: usize) -> Topology {
        let mut nodes = vec![];
        let mut links = vec![];
        for i in 0..n_switches {
            nodes.push((format!("S{i}"), NodeKindConfig::Switch));
            if i > 0 {
                links.push((format!("S{}", i - 1), format!("S{i}")));
            }
        }
        let config = TopologyConfig {
            schema_version: 1,
            notes: vec![],
            nodes: nodes
                .into_iter()
                .map(|(id, kind)| crate::net::NodeConfig {
                    id,
                    kind,
                    cpu_capacity: None,
                    proc_delay_ms: None,
                })
                .collect(),
            links: links
                .into_iter()
                .map(|(a, b)| crate::net::LinkConfig {
                    a,
                    b,
                    capacity_mbps: 12.0,
                    prop_delay_ms: None,
                })
                .collect(),
        };
        Topology::from_config(&config).unwrap()
    }

    #[test]
    fn idle_network_has_zero_load() {
        let t = line_topology(3);
        let load = network_load_from_bytes(&BTreeMap::new(), &t, 1_000_000_000).unwrap();
        assert_eq!(load, 0.0);
    }

    #[test]
    fn one_saturated_channel_out_of_n() {
        // Four switches in a line: three links, six directed channels.
        let t = line_topology(4);
        let n = t.load_bearing_channels().count() as f64;
        assert_eq!(n, 6.0);
        // 12 Mbps for one second on one channel = 1.5e6 bytes.
        let mut bytes = BTreeMap::new();
        bytes.insert(ChannelId::new("S0", "S1"), 1_500_000u64);
        let load = network_load_from_bytes(&bytes, &t, 1_000_000_000).unwrap();
        assert!((load - 1.0 / n).abs() < 1e-12, "load {load} != 1/{n}");
    }

    #[test]
    fn zero_span_is_an_error() {
        let t = line_topology(2);
        assert!(matches!(
            network_load(&[], &t, 0),
            Err(MetricsError::ZeroSpan)
        ));
    }
}
