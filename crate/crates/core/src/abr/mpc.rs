//! Model-predictive control over a short horizon, plus the robust variant
//! that discounts the throughput prediction by recent prediction error.

use std::collections::VecDeque;

use super::AbrPolicy;
use crate::qoe::{BitrateLadder, MetricId, QoeMetric};
use crate::simulator::{Observation, SimConfig};

/// Harmonic mean of the samples, `None` when empty or any sample is not
/// positive.
pub fn harmonic_mean(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() || samples.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let inv: f64 = samples.iter().map(|s| 1.0 / s).sum();
    Some(samples.len() as f64 / inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcParams {
    pub horizon: usize,
    pub robust: bool,
    pub window: usize,
    pub metric: QoeMetric,
    pub chunk_duration_s: f64,
    pub buffer_capacity_s: f64,
    pub pause_s: f64,
}

impl MpcParams {
    pub fn for_config(config: &SimConfig, metric: MetricId) -> Self {
        Self {
            horizon: 5,
            robust: false,
            window: 5,
            metric: QoeMetric::builtin(metric),
            chunk_duration_s: config.chunk_duration_s,
            buffer_capacity_s: config.buffer_capacity_s,
            pause_s: config.pause_s(),
        }
    }
}

impl Default for MpcParams {
    fn default() -> Self {
        Self::for_config(&SimConfig::default(), MetricId::Hd)
    }
}

/// Buffer dynamics the controller plans against: the prediction is taken as
/// the exact transfer rate and request overhead is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcModel {
    pub chunk_duration_s: f64,
    pub buffer_capacity_s: f64,
    pub pause_s: f64,
}

impl MpcModel {
    /// Returns (buffer after, stall) for downloading `bits` at `kbps`.
    pub fn step(&self, buffer_s: f64, bits: f64, kbps: f64) -> (f64, f64) {
        let dt = bits / (kbps * 1000.0);
        let stall = (dt - buffer_s).max(0.0);
        let mut buf = (buffer_s - dt).max(0.0) + self.chunk_duration_s;
        while buf > self.buffer_capacity_s + 1e-9 {
            buf -= self.pause_s;
        }
        (buf, stall)
    }
}

#[derive(Debug, Clone)]
pub struct Mpc {
    params: MpcParams,
    errors: VecDeque<f64>,
    last_prediction: Option<f64>,
}

struct Search<'a> {
    model: MpcModel,
    sizes: &'a [f64],
    q: &'a [f64],
    q_max: f64,
    mu: f64,
    kbps: f64,
    depth: usize,
    best: f64,
}

impl Search<'_> {
    fn visit(&mut self, level: usize, buffer: f64, prev_q: Option<f64>, acc: f64) {
        if level == self.depth {
            if acc > self.best {
                self.best = acc;
            }
            return;
        }
        let bound = acc + (self.depth - level) as f64 * self.q_max;
        if bound + 1e-9 * (1.0 + bound.abs()) < self.best {
            return;
        }
        // high rungs first tend to find good incumbents early
        for r in (0..self.q.len()).rev() {
            let (next, stall) = self.model.step(buffer, self.sizes[r], self.kbps);
            let drop = prev_q.map_or(0.0, |p| (p - self.q[r]).max(0.0));
            let reward = self.q[r] - self.mu * stall - drop;
            self.visit(level + 1, next, Some(self.q[r]), acc + reward);
        }
    }
}

impl Mpc {
    pub fn new(params: MpcParams) -> Self {
        Self {
            params,
            errors: VecDeque::new(),
            last_prediction: None,
        }
    }

    pub fn params(&self) -> &MpcParams {
        &self.params
    }

    fn model(&self) -> MpcModel {
        MpcModel {
            chunk_duration_s: self.params.chunk_duration_s,
            buffer_capacity_s: self.params.buffer_capacity_s,
            pause_s: self.params.pause_s,
        }
    }

    /// Best first rung for a fixed throughput prediction. Among sequences
    /// of equal total reward the lowest first rung wins.
    pub fn plan(&self, obs: &Observation, ladder: &BitrateLadder, prediction_kbps: f64) -> usize {
        if !(prediction_kbps > 0.0) || obs.next_chunk_bits.len() != ladder.len() {
            return 0;
        }
        let Ok(q) = self.params.metric.qualities(ladder) else {
            return 0;
        };
        let depth = self.params.horizon.min(obs.chunks_remaining).max(1);
        let q_max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let prev_q = obs.last_rung.and_then(|r| q.get(r).copied());
        let mut search = Search {
            model: self.model(),
            sizes: &obs.next_chunk_bits,
            q: &q,
            q_max,
            mu: self.params.metric.mu,
            kbps: prediction_kbps,
            depth,
            best: f64::NEG_INFINITY,
        };
        let mut best_rung = 0;
        let mut best_value = f64::NEG_INFINITY;
        for r in 0..q.len() {
            let (next, stall) = search.model.step(obs.buffer_s, search.sizes[r], prediction_kbps);
            let drop = prev_q.map_or(0.0, |p| (p - q[r]).max(0.0));
            let reward = q[r] - search.mu * stall - drop;
            // re-seed the incumbent so this subtree's own optimum is exact
            search.best = best_value;
            search.visit(1, next, Some(q[r]), reward);
            if search.best > best_value {
                best_value = search.best;
                best_rung = r;
            }
        }
        best_rung
    }

    fn prediction(&mut self, obs: &Observation) -> Option<f64> {
        let recent: Vec<f64> = obs.recent_throughputs(self.params.window).collect();
        // each decision follows exactly one new measurement
        if let (Some(prev), Some(&actual)) = (self.last_prediction, recent.last()) {
            self.errors.push_back((prev - actual).abs() / actual);
            while self.errors.len() > self.params.window {
                self.errors.pop_front();
            }
        }
        let estimate = harmonic_mean(&recent);
        self.last_prediction = estimate;
        let estimate = estimate?;
        if self.params.robust {
            let max_err = self.errors.iter().cloned().fold(0.0, f64::max);
            Some(estimate / (1.0 + max_err))
        } else {
            Some(estimate)
        }
    }

    /// Seeds the rolling error window, oldest first.
    pub fn with_errors(mut self, errors: &[f64]) -> Self {
        self.errors = errors.iter().copied().collect();
        while self.errors.len() > self.params.window {
            self.errors.pop_front();
        }
        self
    }
}

impl AbrPolicy for Mpc {
    fn name(&self) -> &str {
        if self.params.robust {
            "robust_mpc"
        } else {
            "mpc"
        }
    }

    fn decide(&mut self, obs: &Observation, ladder: &BitrateLadder) -> usize {
        match self.prediction(obs) {
            Some(p) => self.plan(obs, ladder, p),
            None => 0,
        }
    }

    fn reset(&mut self) {
        self.errors.clear();
        self.last_prediction = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abr::testutil::obs;
    use crate::simulator::chunk_size_bits;

    fn sizes(l: &BitrateLadder) -> Vec<f64> {
        let c = SimConfig::default();
        (0..l.len()).map(|r| chunk_size_bits(l, r, &c).unwrap()).collect()
    }

    #[test]
    fn harmonic() {
        let h = harmonic_mean(&[10.0, 20.0, 40.0, 40.0, 40.0]).unwrap();
        assert!((h - 22.222_222_222).abs() < 1e-6);
        assert_eq!(harmonic_mean(&[]), None);
        assert_eq!(harmonic_mean(&[1.0, 0.0]), None);
    }

    #[test]
    fn oversupplied_full_buffer_goes_top() {
        let l = BitrateLadder::uhd();
        let o = obs(24.0, &[200_000.0; 8], sizes(&l));
        let mpc = Mpc::new(MpcParams::default());
        assert_eq!(mpc.plan(&o, &l, 200_000.0), 9);
        let mut mpc = Mpc::new(MpcParams::default());
        assert_eq!(mpc.decide(&o, &l), 9);
    }

    #[test]
    fn zero_prediction_is_rung_zero() {
        let l = BitrateLadder::uhd();
        let o = obs(10.0, &[], sizes(&l));
        let mut mpc = Mpc::new(MpcParams::default());
        assert_eq!(mpc.decide(&o, &l), 0);
        assert_eq!(mpc.plan(&o, &l, 0.0), 0);
    }

    #[test]
    fn single_step_5000() {
        let l = BitrateLadder::uhd();
        let o = obs(2.0, &[5000.0; 5], sizes(&l));
        let mpc = Mpc::new(MpcParams {
            horizon: 1,
            ..MpcParams::default()
        });
        assert_eq!(mpc.plan(&o, &l, 5000.0), 5);
    }

    #[test]
    fn zero_errors_match_plain() {
        let l = BitrateLadder::uhd();
        let o = obs(8.0, &[3000.0, 9000.0, 7000.0, 12000.0, 6000.0], sizes(&l));
        let mut plain = Mpc::new(MpcParams::default());
        let mut robust = Mpc::new(MpcParams {
            robust: true,
            ..MpcParams::default()
        })
        .with_errors(&[0.0; 5]);
        assert_eq!(plain.decide(&o, &l), robust.decide(&o, &l));
    }

    #[test]
    fn robust_error_window_discounts() {
        let l = BitrateLadder::uhd();
        let s = sizes(&l);
        let mut robust = Mpc::new(MpcParams {
            robust: true,
            ..MpcParams::default()
        });
        // first decision predicts 10,000; the next sample comes in at 5,000
        let p1 = robust.prediction(&obs(10.0, &[10_000.0], s.clone())).unwrap();
        assert!((p1 - 10_000.0).abs() < 1e-9);
        let p2 = robust.prediction(&obs(10.0, &[10_000.0, 5_000.0], s)).unwrap();
        let hm = harmonic_mean(&[10_000.0, 5_000.0]).unwrap();
        assert!((p2 - hm / 2.0).abs() < 1e-9, "{p2}");
    }

    #[test]
    fn model_pause_loop() {
        let m = MpcModel {
            chunk_duration_s: 2.0,
            buffer_capacity_s: 24.0,
            pause_s: 2.0,
        };
        let (b, s) = m.step(24.0, 1000.0, 1000.0);
        assert_eq!(s, 0.0);
        assert!((b - 23.999).abs() < 1e-9);
        let (b, s) = m.step(1.0, 4_000_000.0, 1000.0);
        assert!((s - 3.0).abs() < 1e-12);
        assert!((b - 2.0).abs() < 1e-12);
    }
}
