//! Bitrate ladder, quality functions and session QoE.
//!
//! Session QoE is
//!
//! ```text
//! Σ q(R_n) − μ Σ T_n − Σ_{n<N} S_n · (q(R_n) − q(R_{n+1}))
//! ```
//!
//! where `S_n` is 1 only when quality drops between chunk `n` and `n + 1`.
//! The legacy form penalises `|q(R_{n+1}) − q(R_n)|` in both directions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    /// Vertical resolution in pixels.
    pub resolution: u32,
    pub bitrate_kbps: f64,
}

impl Representation {
    pub const fn new(resolution: u32, bitrate_kbps: f64) -> Self {
        Self {
            resolution,
            bitrate_kbps,
        }
    }
}

const UHD_LADDER: [Representation; 10] = [
    Representation::new(144, 100.0),
    Representation::new(240, 300.0),
    Representation::new(360, 500.0),
    Representation::new(480, 1_000.0),
    Representation::new(720, 2_000.0),
    Representation::new(1080, 4_000.0),
    Representation::new(1440, 8_000.0),
    Representation::new(2160, 18_000.0),
    Representation::new(2880, 28_000.0),
    Representation::new(4320, 37_500.0),
];

/// The six-rung ladder of the original learned-ABR evaluation (240p–1440p).
const LEGACY_LADDER: [Representation; 6] = [
    Representation::new(240, 300.0),
    Representation::new(360, 750.0),
    Representation::new(480, 1_200.0),
    Representation::new(720, 1_850.0),
    Representation::new(1080, 2_850.0),
    Representation::new(1440, 4_300.0),
];

/// Ordered quality rungs; bitrate and resolution both strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Representation>", into = "Vec<Representation>")]
pub struct BitrateLadder {
    reps: Vec<Representation>,
}

impl BitrateLadder {
    pub fn new(reps: Vec<Representation>) -> Result<Self> {
        if reps.is_empty() {
            return Err(Error::InvalidLadder("ladder is empty".into()));
        }
        for r in &reps {
            if !(r.bitrate_kbps.is_finite() && r.bitrate_kbps > 0.0) || r.resolution == 0 {
                return Err(Error::InvalidLadder(format!("bad representation {r:?}")));
            }
        }
        for w in reps.windows(2) {
            if w[1].bitrate_kbps <= w[0].bitrate_kbps || w[1].resolution <= w[0].resolution {
                return Err(Error::InvalidLadder(format!(
                    "{:?} does not strictly improve on {:?}",
                    w[1], w[0]
                )));
            }
        }
        Ok(Self { reps })
    }

    /// The 10-rung UHD ladder, 144p/100 kbps up to 4320p/37.5 Mbps.
    pub fn uhd() -> Self {
        Self {
            reps: UHD_LADDER.to_vec(),
        }
    }

    /// The 6-rung 240p–1440p ladder used by the original-configuration
    /// learned baseline.
    pub fn legacy() -> Self {
        Self {
            reps: LEGACY_LADDER.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    pub fn top(&self) -> usize {
        self.reps.len() - 1
    }

    pub fn get(&self, rung: usize) -> Result<&Representation> {
        self.reps.get(rung).ok_or(Error::InvalidRung {
            rung,
            len: self.reps.len(),
        })
    }

    pub fn representations(&self) -> &[Representation] {
        &self.reps
    }

    pub fn bitrate_kbps(&self, rung: usize) -> Result<f64> {
        self.get(rung).map(|r| r.bitrate_kbps)
    }

    /// Highest rung whose bitrate does not exceed `kbps`, or 0.
    pub fn highest_at_most(&self, kbps: f64) -> usize {
        self.reps
            .iter()
            .rposition(|r| r.bitrate_kbps <= kbps)
            .unwrap_or(0)
    }
}

impl Default for BitrateLadder {
    fn default() -> Self {
        Self::uhd()
    }
}

impl TryFrom<Vec<Representation>> for BitrateLadder {
    type Error = Error;
    fn try_from(reps: Vec<Representation>) -> Result<Self> {
        Self::new(reps)
    }
}

impl From<BitrateLadder> for Vec<Representation> {
    fn from(l: BitrateLadder) -> Self {
        l.reps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Lin,
    Log,
    Hd,
    Smartphone,
    Tv,
    Vr,
}

impl MetricId {
    pub const ALL: [MetricId; 6] = [
        MetricId::Lin,
        MetricId::Log,
        MetricId::Hd,
        MetricId::Smartphone,
        MetricId::Tv,
        MetricId::Vr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Lin => "lin",
            MetricId::Log => "log",
            MetricId::Hd => "hd",
            MetricId::Smartphone => "smartphone",
            MetricId::Tv => "tv",
            MetricId::Vr => "vr",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Per-device quality scores out of 50, keyed by vertical resolution.
const SMARTPHONE_SCORES: [(u32, f64); 10] = [
    (144, 1.0),
    (240, 10.0),
    (360, 25.0),
    (480, 35.0),
    (720, 42.0),
    (1080, 45.0),
    (1440, 47.0),
    (2160, 48.0),
    (2880, 49.0),
    (4320, 50.0),
];

const TV_SCORES: [(u32, f64); 10] = [
    (144, 1.0),
    (240, 8.0),
    (360, 18.0),
    (480, 24.0),
    (720, 30.0),
    (1080, 35.0),
    (1440, 42.0),
    (2160, 46.0),
    (2880, 48.0),
    (4320, 50.0),
];

const VR_SCORES: [(u32, f64); 10] = [
    (144, 1.0),
    (240, 6.0),
    (360, 14.0),
    (480, 18.0),
    (720, 25.0),
    (1080, 32.0),
    (1440, 38.0),
    (2160, 42.0),
    (2880, 46.0),
    (4320, 50.0),
];

/// Reference vertical resolution for the `hd` metric.
pub const HD_REFERENCE_RESOLUTION: f64 = 4320.0;

/// A quality function plus its rebuffering penalty μ (per stalled second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoeMetric {
    pub id: MetricId,
    pub mu: f64,
    /// Resolution → score table; `None` uses the built-in formula or table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<(u32, f64)>>,
}

impl QoeMetric {
    pub fn builtin(id: MetricId) -> Self {
        let mu = match id {
            MetricId::Lin => 37.5,
            MetricId::Log => 5.93,
            MetricId::Hd => 24.0,
            MetricId::Smartphone => 25.0,
            MetricId::Tv => 45.0,
            MetricId::Vr => 50.0,
        };
        Self {
            id,
            mu,
            scores: None,
        }
    }

    fn table(&self) -> Option<&[(u32, f64)]> {
        if let Some(s) = &self.scores {
            return Some(s);
        }
        match self.id {
            MetricId::Smartphone => Some(&SMARTPHONE_SCORES),
            MetricId::Tv => Some(&TV_SCORES),
            MetricId::Vr => Some(&VR_SCORES),
            _ => None,
        }
    }

    /// q(rung).
    pub fn quality(&self, ladder: &BitrateLadder, rung: usize) -> Result<f64> {
        let rep = ladder.get(rung)?;
        if let Some(table) = self.table() {
            return table
                .iter()
                .find(|(res, _)| *res == rep.resolution)
                .map(|(_, q)| *q)
                .ok_or_else(|| Error::UnknownResolution {
                    metric: self.id.to_string(),
                    resolution: rep.resolution,
                });
        }
        Ok(match self.id {
            MetricId::Lin => rep.bitrate_kbps / 1000.0,
            MetricId::Log => (rep.bitrate_kbps / ladder.representations()[0].bitrate_kbps).ln(),
            MetricId::Hd => 50.0 * f64::from(rep.resolution) / HD_REFERENCE_RESOLUTION,
            // tables handled above
            MetricId::Smartphone | MetricId::Tv | MetricId::Vr => unreachable!(),
        })
    }

    /// q for every rung of `ladder`.
    pub fn qualities(&self, ladder: &BitrateLadder) -> Result<Vec<f64>> {
        (0..ladder.len()).map(|r| self.quality(ladder, r)).collect()
    }
}

/// Free-function form of [`QoeMetric::quality`].
pub fn quality(metric: &QoeMetric, ladder: &BitrateLadder, rung: usize) -> Result<f64> {
    metric.quality(ladder, rung)
}

/// 1 when quality strictly drops, else 0.
pub fn downgrade_indicator(q_prev: f64, q_next: f64) -> f64 {
    if q_next < q_prev {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    /// Penalise only quality decreases.
    #[default]
    DowngradeOnly,
    /// Penalise |Δq| in both directions (legacy form).
    Symmetric,
}

impl Smoothness {
    pub fn penalty(self, q_prev: f64, q_next: f64) -> f64 {
        match self {
            Smoothness::DowngradeOnly => downgrade_indicator(q_prev, q_next) * (q_prev - q_next),
            Smoothness::Symmetric => (q_next - q_prev).abs(),
        }
    }
}

/// Reward of a single chunk: q − μ·rebuffer − smoothness penalty against the
/// previous chunk (none for the first chunk).
pub fn chunk_reward(
    metric: &QoeMetric,
    ladder: &BitrateLadder,
    prev_rung: Option<usize>,
    rung: usize,
    rebuffer_s: f64,
    mu_override: Option<f64>,
) -> Result<f64> {
    chunk_reward_with(
        metric,
        ladder,
        prev_rung,
        rung,
        rebuffer_s,
        mu_override,
        Smoothness::DowngradeOnly,
    )
}

pub fn chunk_reward_with(
    metric: &QoeMetric,
    ladder: &BitrateLadder,
    prev_rung: Option<usize>,
    rung: usize,
    rebuffer_s: f64,
    mu_override: Option<f64>,
    smoothness: Smoothness,
) -> Result<f64> {
    let q = metric.quality(ladder, rung)?;
    let mu = mu_override.unwrap_or(metric.mu);
    let switch = match prev_rung {
        Some(p) => smoothness.penalty(metric.quality(ladder, p)?, q),
        None => 0.0,
    };
    Ok(q - mu * rebuffer_s - switch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub rung: usize,
    pub rebuffer_s: f64,
}

/// Per-chunk rung and stall time of one playback session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionRecord {
    pub chunks: Vec<ChunkRecord>,
}

impl SessionRecord {
    pub fn new(chunks: Vec<ChunkRecord>) -> Self {
        Self { chunks }
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(rung, rebuffer_s)| ChunkRecord { rung, rebuffer_s })
                .collect(),
        )
    }

    pub fn push(&mut self, rung: usize, rebuffer_s: f64) {
        self.chunks.push(ChunkRecord { rung, rebuffer_s });
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn total_rebuffer_s(&self) -> f64 {
        self.chunks.iter().map(|c| c.rebuffer_s).sum()
    }

    pub fn mean_rung(&self) -> f64 {
        if self.chunks.is_empty() {
            return 0.0;
        }
        self.chunks.iter().map(|c| c.rung as f64).sum::<f64>() / self.chunks.len() as f64
    }

    /// (downward switches, upward switches).
    pub fn switch_counts(&self) -> (usize, usize) {
        self.chunks.windows(2).fold((0, 0), |(down, up), w| {
            match w[1].rung.cmp(&w[0].rung) {
                std::cmp::Ordering::Less => (down + 1, up),
                std::cmp::Ordering::Greater => (down, up + 1),
                std::cmp::Ordering::Equal => (down, up),
            }
        })
    }

    fn validate(&self) -> Result<()> {
        if self.chunks.is_empty() {
            return Err(Error::EmptyRecord);
        }
        if let Some(c) = self.chunks.iter().find(|c| !(c.rebuffer_s >= 0.0 && c.rebuffer_s.is_finite())) {
            return Err(Error::Config(format!("invalid rebuffer time {}", c.rebuffer_s)));
        }
        Ok(())
    }
}

fn session_score(
    metric: &QoeMetric,
    ladder: &BitrateLadder,
    record: &SessionRecord,
    smoothness: Smoothness,
) -> Result<f64> {
    record.validate()?;
    let mut prev = None;
    let mut rewards = Vec::with_capacity(record.len());
    for c in &record.chunks {
        rewards.push(chunk_reward_with(metric, ladder, prev, c.rung, c.rebuffer_s, None, smoothness)?);
        prev = Some(c.rung);
    }
    Ok(rewards.iter().sum())
}

/// Whole-session formula: total quality, minus μ times total stall, minus
/// the summed switch penalties. Agrees with the chained per-chunk sum up to
/// rounding.
pub fn session_qoe_closed_form(
    metric: &QoeMetric,
    ladder: &BitrateLadder,
    record: &SessionRecord,
    smoothness: Smoothness,
) -> Result<f64> {
    record.validate()?;
    let q: Vec<f64> = record
        .chunks
        .iter()
        .map(|c| metric.quality(ladder, c.rung))
        .collect::<Result<_>>()?;
    let quality: f64 = q.iter().sum();
    let stall: f64 = record.total_rebuffer_s();
    let switches: f64 = q.windows(2).map(|w| smoothness.penalty(w[0], w[1])).sum();
    Ok(quality - metric.mu * stall - switches)
}

/// Session QoE with downgrade-only smoothness penalties.
pub fn session_qoe(metric: &QoeMetric, ladder: &BitrateLadder, record: &SessionRecord) -> Result<f64> {
    session_score(metric, ladder, record, Smoothness::DowngradeOnly)
}

/// Session QoE with the legacy symmetric smoothness penalty.
pub fn session_qoe_legacy(metric: &QoeMetric, ladder: &BitrateLadder, record: &SessionRecord) -> Result<f64> {
    session_score(metric, ladder, record, Smoothness::Symmetric)
}

/// Divides every score by the reference algorithm's score.
pub fn normalize_scores(
    scores: &BTreeMap<String, f64>,
    reference: &str,
) -> Result<BTreeMap<String, f64>> {
    let base = scores
        .get(reference)
        .copied()
        .filter(|v| *v != 0.0 && v.is_finite())
        .ok_or_else(|| Error::DegenerateReference(reference.to_string()))?;
    Ok(scores
        .iter()
        .map(|(k, v)| {
            let n = if k == reference { 1.0 } else { v / base };
            (k.clone(), n)
        })
        .collect())
}

/// Optional overrides for the ladder and metric definitions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QoeConfig {
    #[serde(default)]
    pub ladder: Option<BitrateLadder>,
    #[serde(default)]
    pub metrics: Vec<QoeMetric>,
}

impl QoeConfig {
    pub fn ladder(&self) -> BitrateLadder {
        self.ladder.clone().unwrap_or_default()
    }

    pub fn metric(&self, id: MetricId) -> QoeMetric {
        self.metrics
            .iter()
            .find(|m| m.id == id)
            .cloned()
            .unwrap_or_else(|| QoeMetric::builtin(id))
    }
}
