//! Markov-chain band-switching trace synthesis.
//!
//! The link sits in one radio band at a time. Each visit lasts a
//! geometrically distributed number of samples with the band's mean dwell,
//! after which the next band is drawn from the transition matrix row (self
//! transitions simply extend the stay). Within a visit every sample is
//! Gaussian around the band mean, clipped at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};

use super::{Sample, ThroughputTrace, TraceSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    LowBandFdd,
    MidBandTdd,
    NrDcHigh,
    Lte,
    Outage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandState {
    pub band: Band,
    pub mean_kbps: f64,
    pub stddev_kbps: f64,
    pub mean_dwell_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub states: Vec<BandState>,
    /// Row-stochastic; `transitions[i][j]` is P(next = j | leaving i).
    pub transitions: Vec<Vec<f64>>,
    pub sample_interval_ms: u64,
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub initial_state: usize,
}

fn default_name() -> String {
    "synthetic".into()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::InvalidSpec("no band states".into()));
        }
        if self.transitions.len() != n {
            return Err(Error::InvalidSpec(format!(
                "transition matrix has {} rows for {n} states",
                self.transitions.len()
            )));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidSpec(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidSpec(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!("row {i} sums to {sum}")));
            }
        }
        for (i, s) in self.states.iter().enumerate() {
            if !(s.mean_dwell_s.is_finite() && s.mean_dwell_s > 0.0) {
                return Err(Error::InvalidSpec(format!("state {i} dwell must be positive")));
            }
            if !(s.mean_kbps.is_finite() && s.mean_kbps >= 0.0) {
                return Err(Error::InvalidSpec(format!("state {i} mean must be non-negative")));
            }
            if !(s.stddev_kbps.is_finite() && s.stddev_kbps >= 0.0) {
                return Err(Error::InvalidSpec(format!("state {i} stddev must be non-negative")));
            }
            if s.band == Band::Outage && s.mean_kbps != 0.0 {
                return Err(Error::InvalidSpec(format!("outage state {i} must have mean 0")));
            }
        }
        if self.sample_interval_ms == 0 {
            return Err(Error::InvalidSpec("sample interval must be positive".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::InvalidSpec("duration must be positive".into()));
        }
        if self.initial_state >= n {
            return Err(Error::InvalidSpec(format!("initial state {} out of range", self.initial_state)));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// A synthesized trace plus the band path that produced it.
#[derive(Debug, Clone)]
pub struct Synthesized {
    pub trace: ThroughputTrace,
    /// Band state index of every sample.
    pub states: Vec<usize>,
    /// Number of completed dwell periods (band draws after the first).
    pub transitions: usize,
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<ThroughputTrace> {
    synthesize_detailed(spec).map(|s| s.trace)
}

pub fn synthesize_detailed(spec: &SyntheticSpec) -> Result<Synthesized> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let interval = spec.sample_interval_ms;
    let n_samples = ((spec.duration_s * 1000.0 / interval as f64).ceil() as usize).max(1);

    let dwell: Vec<Geometric> = spec
        .states
        .iter()
        .map(|s| {
            let mean_samples = (s.mean_dwell_s * 1000.0 / interval as f64).max(1.0);
            Geometric::new(1.0 / mean_samples).expect("probability in (0, 1]")
        })
        .collect();
    let noise: Vec<Option<Normal<f64>>> = spec
        .states
        .iter()
        .map(|s| (s.stddev_kbps > 0.0).then(|| Normal::new(s.mean_kbps, s.stddev_kbps).expect("finite")))
        .collect();

    let mut rates = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    let mut state = spec.initial_state;
    let mut transitions = 0;
    while rates.len() < n_samples {
        let stay = 1 + dwell[state].sample(&mut rng) as usize;
        let band = &spec.states[state];
        for _ in 0..stay.min(n_samples - rates.len()) {
            let r = match (band.band, &noise[state]) {
                (Band::Outage, _) => 0.0,
                (_, Some(normal)) => normal.sample(&mut rng).max(0.0),
                (_, None) => band.mean_kbps,
            };
            rates.push(r);
            states.push(state);
        }
        state = draw_next(&spec.transitions[state], rng.random::<f64>());
        transitions += 1;
    }

    let samples = rates
        .iter()
        .enumerate()
        .map(|(i, &r)| Sample::new(i as u64 * interval, r))
        .collect();
    let trace = ThroughputTrace::new(
        spec.name.clone(),
        TraceSource::Synthetic,
        samples,
        n_samples as u64 * interval,
    )?;
    Ok(Synthesized {
        trace,
        states,
        transitions,
    })
}

fn draw_next(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // rounding left `u` above the cumulative sum
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

/// Stationary distribution of a row-stochastic matrix by power iteration.
pub fn stationary_distribution(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        // lazy step: damps periodic chains
        for (a, b) in next.iter_mut().zip(&pi) {
            *a = 0.5 * (*a + b);
        }
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-14 {
            break;
        }
    }
    pi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(mean: f64, std: f64) -> SyntheticSpec {
        SyntheticSpec {
            name: "single".into(),
            states: vec![BandState {
                band: Band::MidBandTdd,
                mean_kbps: mean,
                stddev_kbps: std,
                mean_dwell_s: 10.0,
            }],
            transitions: vec![vec![1.0]],
            sample_interval_ms: 1000,
            duration_s: 60.0,
            seed: 1,
            initial_state: 0,
        }
    }

    fn two_state(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            name: "two".into(),
            states: vec![
                BandState {
                    band: Band::MidBandTdd,
                    mean_kbps: 100_000.0,
                    stddev_kbps: 10_000.0,
                    mean_dwell_s: 5.0,
                },
                BandState {
                    band: Band::LowBandFdd,
                    mean_kbps: 20_000.0,
                    stddev_kbps: 5_000.0,
                    mean_dwell_s: 5.0,
                },
            ],
            transitions: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            sample_interval_ms: 1000,
            duration_s: 80_000.0,
            seed,
            initial_state: 0,
        }
    }

    #[test]
    fn degenerate_chain_is_constant() {
        let t = synthesize(&single(50_000.0, 0.0)).unwrap();
        assert!(t.samples().iter().all(|s| s.throughput_kbps == 50_000.0));
        assert_eq!(t.duration_ms(), 60_000);
    }

    #[test]
    fn same_seed_same_trace() {
        let a = synthesize(&two_state(9)).unwrap();
        let b = synthesize(&two_state(9)).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = synthesize(&two_state(10)).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn symmetric_occupancy() {
        let s = synthesize_detailed(&two_state(3)).unwrap();
        assert!(s.transitions >= 10_000, "only {} transitions", s.transitions);
        let frac0 = s.states.iter().filter(|&&st| st == 0).count() as f64 / s.states.len() as f64;
        assert!((frac0 - 0.5).abs() <= 0.05, "occupancy {frac0}");
    }

    #[test]
    fn rejects_bad_rows() {
        let mut spec = two_state(1);
        spec.transitions[1] = vec![0.7, 0.7];
        assert!(matches!(synthesize(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn outage_must_be_silent() {
        let mut spec = single(1000.0, 0.0);
        spec.states[0].band = Band::Outage;
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn stationary_of_asymmetric_chain() {
        let pi = stationary_distribution(&[vec![0.9, 0.1], vec![0.3, 0.7]]);
        assert!((pi[0] - 0.75).abs() < 1e-9);
        assert!((pi[1] - 0.25).abs() < 1e-9);
    }
}
