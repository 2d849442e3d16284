//! Mahimahi packet-delivery traces.
//!
//! A Mahimahi trace is one integer per line; each is a millisecond timestamp
//! at which one MTU-sized packet may be delivered. Timestamp `m` stands for
//! the millisecond `[m - 1, m)`.

use std::fmt::Write as _;

use super::{Sample, ThroughputTrace, TraceSource};
use crate::error::{Error, Result};

pub const DEFAULT_MTU_BYTES: u32 = 1500;
pub const DEFAULT_BUCKET_MS: u64 = 1000;

/// Delivery opportunities for one pass over `trace`.
///
/// A fractional-packet accumulator carries across milliseconds, so the
/// count over any window is the window's bits / packet size to within one
/// packet.
pub fn to_mahimahi(trace: &ThroughputTrace, mtu_bytes: u32) -> Vec<u64> {
    let packet_bits = f64::from(mtu_bytes) * 8.0;
    let mut out = Vec::new();
    let mut carry = 0.0;
    let samples = trace.samples();
    for (i, s) in samples.iter().enumerate() {
        let end = samples.get(i + 1).map_or(trace.duration_ms(), |n| n.t_ms);
        // kbps == bits per ms
        let per_ms = s.throughput_kbps;
        if per_ms == 0.0 {
            continue;
        }
        for ms in s.t_ms + 1..=end {
            carry += per_ms;
            while carry >= packet_bits {
                out.push(ms);
                carry -= packet_bits;
            }
        }
    }
    out
}

pub fn render(timestamps: &[u64]) -> String {
    let mut out = String::with_capacity(timestamps.len() * 6);
    for ts in timestamps {
        let _ = writeln!(out, "{ts}");
    }
    out
}

/// Parses a Mahimahi trace file, enforcing non-decreasing timestamps.
pub fn parse(text: &str) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let ts: u64 = line.parse().map_err(|_| Error::MalformedTrace {
            line: idx + 1,
            reason: format!("expected a non-negative integer, got `{line}`"),
        })?;
        if let Some(&prev) = out.last() {
            if ts < prev {
                return Err(Error::MalformedTrace {
                    line: idx + 1,
                    reason: format!("timestamp {ts} decreases from {prev}"),
                });
            }
        }
        out.push(ts);
    }
    Ok(out)
}

/// Per-bucket throughput in kbps: packets × packet bits / bucket length.
///
/// The bucket count covers both the last timestamp and `duration_ms`, and
/// is at least one.
pub fn bucket_rates(
    timestamps: &[u64],
    bucket_ms: u64,
    duration_ms: Option<u64>,
    mtu_bytes: u32,
) -> Result<Vec<f64>> {
    if bucket_ms == 0 {
        return Err(Error::InvalidInterval {
            start: 0.0,
            end: 0.0,
        });
    }
    if let Some(i) = timestamps.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::MalformedTrace {
            line: i + 2,
            reason: format!("timestamp {} decreases from {}", timestamps[i + 1], timestamps[i]),
        });
    }
    let span = timestamps
        .last()
        .copied()
        .unwrap_or(0)
        .max(duration_ms.unwrap_or(0));
    let buckets = span.div_ceil(bucket_ms).max(1) as usize;
    let mut counts = vec![0u64; buckets];
    for &ts in timestamps {
        let b = (ts.saturating_sub(1) / bucket_ms) as usize;
        counts[b] += 1;
    }
    let packet_bits = f64::from(mtu_bytes) * 8.0;
    Ok(counts
        .into_iter()
        .map(|c| c as f64 * packet_bits / bucket_ms as f64)
        .collect())
}

/// Rebuilds a throughput trace from delivery opportunities, one sample per
/// bucket.
pub fn from_mahimahi(
    timestamps: &[u64],
    bucket_ms: u64,
    duration_ms: Option<u64>,
    mtu_bytes: u32,
) -> Result<ThroughputTrace> {
    let rates = bucket_rates(timestamps, bucket_ms, duration_ms, mtu_bytes)?;
    let samples = rates
        .iter()
        .enumerate()
        .map(|(i, &r)| Sample::new(i as u64 * bucket_ms, r))
        .collect();
    ThroughputTrace::new(
        "mahimahi",
        TraceSource::Mahimahi,
        samples,
        rates.len() as u64 * bucket_ms,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_packet_per_ms() {
        let t = ThroughputTrace::constant(12_000.0, 3).unwrap();
        assert_eq!(to_mahimahi(&t, 1500), vec![1, 2, 3]);
    }

    #[test]
    fn half_rate_accumulates() {
        let t = ThroughputTrace::constant(6_000.0, 4).unwrap();
        assert_eq!(to_mahimahi(&t, 1500), vec![2, 4]);
    }

    #[test]
    fn dead_air_emits_nothing() {
        let t = ThroughputTrace::from_rates("z", TraceSource::Synthetic, 10, &[0.0, 1.0]).unwrap();
        assert!(to_mahimahi(&t, 1500)[..].iter().all(|&ms| ms > 10));
        // rendering an empty schedule is an empty file
        assert_eq!(render(&[]), "");
    }

    #[test]
    fn full_second_of_packets() {
        let ts: Vec<u64> = (1..=1000).collect();
        let rates = bucket_rates(&ts, 1000, None, 1500).unwrap();
        assert_eq!(rates, vec![12_000.0]);
    }

    #[test]
    fn empty_with_declared_duration() {
        let rates = bucket_rates(&[], 1000, Some(1000), 1500).unwrap();
        assert_eq!(rates, vec![0.0]);
        assert!(matches!(from_mahimahi(&[], 1000, Some(1000), 1500), Err(Error::DeadTrace)));
    }

    #[test]
    fn round_trip_half_rate() {
        let t = ThroughputTrace::constant(6_000.0, 10_000).unwrap();
        let back = from_mahimahi(&to_mahimahi(&t, 1500), 1000, Some(10_000), 1500).unwrap();
        for s in back.samples() {
            assert!((s.throughput_kbps - 6_000.0).abs() <= 12.0);
        }
    }

    #[test]
    fn decreasing_rejected() {
        assert!(matches!(parse("1\n3\n2\n"), Err(Error::MalformedTrace { line: 3, .. })));
        assert_eq!(parse("1\n1\n2\n").unwrap(), vec![1, 1, 2]);
    }
}
