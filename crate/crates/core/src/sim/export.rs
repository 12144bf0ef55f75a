//! On-disk formats: the packet trace CSV and the metrics report JSON.
//!
//! Trace CSV, schema v1. Columns:
//! `stream_id,dst,seq,sent_at_us,received_at_us,bytes`. Timestamps are
//! microseconds with nanosecond precision (three decimals). Rows appear in
//! delivery order.

use std::io::{self, Write};

use crate::sim::engine::PacketRecord;
use crate::sim::metrics::MetricsReport;

pub const TRACE_CSV_HEADER: &str = "stream_id,dst,seq,sent_at_us,received_at_us,bytes";

fn us(ns: u64) -> String {
    format!("{:.3}", ns as f64 / 1000.0)
}

pub fn write_trace_csv<W: Write>(mut w: W, records: &[PacketRecord]) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.stream_id,
            r.dst,
            r.seq,
            us(r.sent_at),
            us(r.received_at),
            r.bytes_delivered
        )?;
    }
    Ok(())
}

pub fn trace_csv_string(records: &[PacketRecord]) -> String {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, records).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace rows are ASCII")
}

pub fn report_json_string(report: &MetricsReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}
