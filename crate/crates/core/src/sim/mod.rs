//! Deterministic packet-level simulation: stream injection, per-hop
//! serialization/propagation/queuing/processing, per-packet records, and the
//! latency/jitter/load metrics computed from them.

mod engine;
mod export;
mod flow;
mod metrics;

pub use engine::{
    run, LegRecord, PacketRecord, RelaySpec, SimConfig, SimError, SimOutcome, TagCounts,
};
pub use export::{report_json_string, trace_csv_string, write_trace_csv, TRACE_CSV_HEADER};
pub use flow::{packetize, FlowError, FlowSpec};
pub use metrics::{
    avg_latency, build_report, channel_bytes_from_trace, jitter, network_load,
    network_load_from_bytes, DstMetrics, LinkBytes, MetricsError, MetricsReport, TagReport,
    METRICS_SCHEMA_VERSION,
};
