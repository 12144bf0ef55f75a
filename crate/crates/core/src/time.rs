//! Simulation time base.
//!
//! All simulated time is integer nanoseconds so that per-hop delay sums are
//! exact and repeated runs are bit-identical.

/// Simulated time / duration in nanoseconds.
pub type Nanos = u64;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;
pub const NANOS_PER_MS: u64 = 1_000_000;

/// Convert milliseconds to nanoseconds, rounding to the nearest tick.
pub fn ns_from_ms(ms: f64) -> Nanos {
    (ms * NANOS_PER_MS as f64).round() as Nanos
}

/// Convert seconds to nanoseconds, rounding to the nearest tick.
pub fn ns_from_secs(secs: f64) -> Nanos {
    (secs * NANOS_PER_SEC as f64).round() as Nanos
}

/// Nanoseconds as fractional seconds (reporting only; never fed back into
/// simulation arithmetic).
pub fn secs_f64(ns: Nanos) -> f64 {
    ns as f64 / NANOS_PER_SEC as f64
}

/// Time to clock `bytes` onto a channel of `capacity_bps`, rounded to the
/// nearest nanosecond.
pub fn serialization_ns(bytes: u32, capacity_bps: u64) -> Nanos {
    debug_assert!(capacity_bps > 0);
    let bits = bytes as u128 * 8 * NANOS_PER_SEC as u128;
    ((bits + capacity_bps as u128 / 2) / capacity_bps as u128) as Nanos
}
