//! Throughput traces: the world model every simulation runs against.
//!
//! A trace is a zero-order-hold rate signal: each sample's throughput holds
//! until the next sample's timestamp, and the last sample holds until
//! `duration_ms`. Queries past the end wrap around to `t = 0`.

mod csv;
pub mod mahimahi;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{parse_csv, write_csv};
pub use self::synth::{
    stationary_distribution, synthesize, synthesize_detailed, Band, BandState, Synthesized,
    SyntheticSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Measured,
    Synthetic,
    Mahimahi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t_ms: u64,
    pub throughput_kbps: f64,
}

impl Sample {
    pub fn new(t_ms: u64, throughput_kbps: f64) -> Self {
        Self {
            t_ms,
            throughput_kbps,
        }
    }
}

/// Immutable, validated throughput trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputTrace {
    name: String,
    source: TraceSource,
    samples: Vec<Sample>,
    duration_ms: u64,
    /// `prefix_bits[i]` is the number of bits delivered in `[0, t_i)`; the
    /// final entry is the total over one pass of the trace.
    prefix_bits: Vec<f64>,
}

impl ThroughputTrace {
    /// Builds a trace, checking every invariant: first sample at 0,
    /// strictly increasing timestamps, finite non-negative rates, an end
    /// time past the last sample and at least one positive sample.
    pub fn new(
        name: impl Into<String>,
        source: TraceSource,
        samples: Vec<Sample>,
        duration_ms: u64,
    ) -> Result<Self> {
        let first = samples.first().ok_or(Error::MalformedTrace {
            line: 0,
            reason: "trace has no samples".into(),
        })?;
        if first.t_ms != 0 {
            return Err(Error::MalformedTrace {
                line: 0,
                reason: format!("first sample at {} ms, expected 0", first.t_ms),
            });
        }
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].t_ms <= pair[0].t_ms {
                return Err(Error::MalformedTrace {
                    line: i + 2,
                    reason: format!(
                        "timestamp {} does not increase past {}",
                        pair[1].t_ms, pair[0].t_ms
                    ),
                });
            }
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.throughput_kbps.is_finite() || s.throughput_kbps < 0.0 {
                return Err(Error::MalformedTrace {
                    line: i + 1,
                    reason: format!("throughput {} is not a non-negative number", s.throughput_kbps),
                });
            }
        }
        let last = samples[samples.len() - 1].t_ms;
        if duration_ms <= last {
            return Err(Error::MalformedTrace {
                line: samples.len(),
                reason: format!("duration {duration_ms} ms ends before the last sample at {last} ms"),
            });
        }
        if !samples.iter().any(|s| s.throughput_kbps > 0.0) {
            return Err(Error::DeadTrace);
        }

        let mut prefix_bits = Vec::with_capacity(samples.len() + 1);
        let mut acc = 0.0;
        prefix_bits.push(acc);
        for (i, s) in samples.iter().enumerate() {
            let end = samples.get(i + 1).map_or(duration_ms, |n| n.t_ms);
            // kbps × ms = bits
            acc += s.throughput_kbps * (end - s.t_ms) as f64;
            prefix_bits.push(acc);
        }

        Ok(Self {
            name: name.into(),
            source,
            samples,
            duration_ms,
            prefix_bits,
        })
    }

    pub fn constant(throughput_kbps: f64, duration_ms: u64) -> Result<Self> {
        Self::new(
            format!("constant-{throughput_kbps}kbps"),
            TraceSource::Synthetic,
            vec![Sample::new(0, throughput_kbps)],
            duration_ms,
        )
    }

    /// Builds a trace from equally spaced rates.
    pub fn from_rates(
        name: impl Into<String>,
        source: TraceSource,
        interval_ms: u64,
        rates_kbps: &[f64],
    ) -> Result<Self> {
        if interval_ms == 0 {
            return Err(Error::InvalidInterval {
                start: 0.0,
                end: 0.0,
            });
        }
        let samples = rates_kbps
            .iter()
            .enumerate()
            .map(|(i, &r)| Sample::new(i as u64 * interval_ms, r))
            .collect();
        Self::new(name, source, samples, rates_kbps.len() as u64 * interval_ms)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn source(&self) -> TraceSource {
        self.source
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_ms
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ms as f64 / 1000.0
    }

    /// Bits delivered by one full pass over the trace.
    pub fn total_bits(&self) -> f64 {
        self.prefix_bits[self.samples.len()]
    }

    pub fn mean_kbps(&self) -> f64 {
        self.total_bits() / self.duration_ms as f64
    }

    pub fn min_kbps(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.throughput_kbps)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_kbps(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.throughput_kbps)
            .fold(0.0, f64::max)
    }

    /// Index of the segment holding at `offset_ms` (which must lie in
    /// `[0, duration_ms)`).
    fn segment_at(&self, offset_ms: f64) -> usize {
        self.samples
            .partition_point(|s| s.t_ms as f64 <= offset_ms)
            .saturating_sub(1)
    }

    fn segment_end(&self, i: usize) -> u64 {
        self.samples.get(i + 1).map_or(self.duration_ms, |s| s.t_ms)
    }

    /// Throughput in effect at `t_s`, with looping.
    pub fn rate_at(&self, t_s: f64) -> f64 {
        let d = self.duration_ms as f64;
        let offset = (t_s * 1000.0).rem_euclid(d);
        self.samples[self.segment_at(offset)].throughput_kbps
    }

    /// Bits delivered in `[0, t_s)` on the looped trace.
    fn cumulative_bits(&self, t_s: f64) -> f64 {
        let d = self.duration_ms as f64;
        let t_ms = t_s * 1000.0;
        let loops = (t_ms / d).floor();
        let offset = (t_ms - loops * d).min(d);
        let i = self.segment_at(offset);
        let seg = &self.samples[i];
        loops * self.total_bits() + self.prefix_bits[i] + seg.throughput_kbps * (offset - seg.t_ms as f64)
    }

    /// Integral of throughput over `[t0_s, t1_s]`, in bits.
    pub fn integrate_bits(&self, t0_s: f64, t1_s: f64) -> Result<f64> {
        if !(t0_s.is_finite() && t1_s.is_finite()) || t0_s < 0.0 || t0_s > t1_s {
            return Err(Error::InvalidInterval {
                start: t0_s,
                end: t1_s,
            });
        }
        if t0_s == t1_s {
            return Ok(0.0);
        }
        Ok((self.cumulative_bits(t1_s) - self.cumulative_bits(t0_s)).max(0.0))
    }

    /// Smallest `Δ ≥ 0` such that `integrate_bits(start_s, start_s + Δ) ≥ bits`.
    pub fn time_to_deliver(&self, start_s: f64, bits: f64) -> Result<f64> {
        if !start_s.is_finite() || start_s < 0.0 {
            return Err(Error::InvalidInterval {
                start: start_s,
                end: start_s,
            });
        }
        if bits <= 0.0 {
            return Ok(0.0);
        }
        let total = self.total_bits();
        let d = self.duration_ms as f64;
        let target = self.cumulative_bits(start_s) + bits;
        // Pick the pass so that the residual lands in (0, total]; the
        // segment reaching it then has a strictly positive rate.
        let passes = ((target / total).ceil() - 1.0).max(0.0);
        let residual = (target - passes * total).clamp(f64::MIN_POSITIVE, total);
        let i = self.prefix_bits[1..].partition_point(|&p| p < residual);
        let i = i.min(self.samples.len() - 1);
        let seg = &self.samples[i];
        let within_ms = if seg.throughput_kbps > 0.0 {
            ((residual - self.prefix_bits[i]) / seg.throughput_kbps).max(0.0)
        } else {
            0.0
        };
        let end_ms = passes * d + seg.t_ms as f64 + within_ms;
        Ok((end_ms / 1000.0 - start_s).max(0.0))
    }

    /// Extracts `[start_s, start_s + duration_s)` of the looped trace,
    /// rebased to zero. Times are rounded to whole milliseconds.
    pub fn slice_window(&self, start_s: f64, duration_s: f64) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s > 0.0) || !start_s.is_finite() || start_s < 0.0 {
            return Err(Error::InvalidInterval {
                start: start_s,
                end: start_s + duration_s,
            });
        }
        let start_ms = (start_s * 1000.0).round() as u64;
        let len_ms = (duration_s * 1000.0).round() as u64;
        if len_ms == 0 {
            return Err(Error::InvalidInterval {
                start: start_s,
                end: start_s + duration_s,
            });
        }
        let end_ms = start_ms + len_ms;
        let mut samples = Vec::new();
        let mut pos = start_ms;
        while pos < end_ms {
            let offset = pos % self.duration_ms;
            let i = self.segment_at(offset as f64);
            let seg_end = pos - offset + self.segment_end(i);
            samples.push(Sample::new(pos - start_ms, self.samples[i].throughput_kbps));
            pos = seg_end.min(end_ms);
        }
        let name = format!("{}@{}+{}", self.name, start_ms, len_ms);
        Self::new(name, self.source, samples, len_ms)
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample::new(s.t_ms, s.throughput_kbps * k))
            .collect();
        Self::new(self.name.clone(), self.source, samples, self.duration_ms)
    }
}
