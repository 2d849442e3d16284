use std::fmt::Write as _;

use super::{Sample, ThroughputTrace, TraceSource};
use crate::error::{Error, Result};

/// Hold assumed for the last sample of a single-sample CSV.
const DEFAULT_LAST_HOLD_MS: u64 = 1000;

fn parse_timestamp(field: &str) -> Option<u64> {
    if let Ok(v) = field.parse::<u64>() {
        return Some(v);
    }
    let f: f64 = field.parse().ok()?;
    (f.is_finite() && f >= 0.0 && f.fract() == 0.0 && f <= u64::MAX as f64).then_some(f as u64)
}

fn parse_row(line: &str) -> std::result::Result<(u64, f64), String> {
    let mut fields = line.split(',').map(str::trim);
    let (Some(ts), Some(rate), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(format!("expected `timestamp_ms,throughput_kbps`, got `{line}`"));
    };
    let ts = parse_timestamp(ts).ok_or_else(|| format!("bad timestamp `{ts}`"))?;
    let rate: f64 = rate.parse().map_err(|_| format!("bad throughput `{rate}`"))?;
    if !rate.is_finite() {
        return Err(format!("bad throughput `{rate}`"));
    }
    if rate < 0.0 {
        return Err(format!("negative throughput {rate}"));
    }
    Ok((ts, rate))
}

/// Parses `timestamp_ms,throughput_kbps` rows, with an optional header.
///
/// Timestamps are rebased so the first sample sits at 0. The last sample
/// holds for as long as the gap before it (one second for single-sample
/// input).
pub fn parse_csv(text: &str) -> Result<ThroughputTrace> {
    parse_csv_named(text, "trace")
}

pub(crate) fn parse_csv_named(text: &str, name: &str) -> Result<ThroughputTrace> {
    let mut rows: Vec<(u64, f64)> = Vec::new();
    let mut seen_first = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = !seen_first;
        seen_first = true;
        match parse_row(line) {
            Ok((ts, rate)) => {
                if let Some(&(prev, _)) = rows.last() {
                    if ts <= prev {
                        return Err(Error::MalformedTrace {
                            line: line_no,
                            reason: format!("timestamp {ts} does not increase past {prev}"),
                        });
                    }
                }
                rows.push((ts, rate));
            }
            // a non-numeric first line is the header
            Err(_) if first && line.chars().any(|c| c.is_ascii_alphabetic()) => {}
            Err(reason) => {
                return Err(Error::MalformedTrace {
                    line: line_no,
                    reason,
                })
            }
        }
    }
    let Some(&(base, _)) = rows.first() else {
        return Err(Error::MalformedTrace {
            line: 0,
            reason: "no samples".into(),
        });
    };
    let n = rows.len();
    let last_hold = if n >= 2 {
        rows[n - 1].0 - rows[n - 2].0
    } else {
        DEFAULT_LAST_HOLD_MS
    };
    let duration = rows[n - 1].0 - base + last_hold;
    let samples = rows
        .into_iter()
        .map(|(t, r)| Sample::new(t - base, r))
        .collect();
    ThroughputTrace::new(name, TraceSource::Measured, samples, duration)
}

/// Canonical CSV rendering (header plus one row per sample).
pub fn write_csv(trace: &ThroughputTrace) -> String {
    let mut out = String::from("timestamp_ms,throughput_kbps\n");
    for s in trace.samples() {
        let _ = writeln!(out, "{},{}", s.t_ms, s.throughput_kbps);
    }
    out
}
