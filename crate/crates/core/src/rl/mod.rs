//! The learned policy: actor-critic networks, rollouts against the
//! simulator, synchronous advantage actor-critic training, checkpoints and a
//! finite-difference gradient check.

mod checkpoint;
mod gradcheck;
mod network;
mod optim;
mod real;
mod rollout;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CheckpointMeta, CheckpointSummary, OptimizerState};
pub use gradcheck::{gradient_check, gradient_check_with, GradCheckReport, Head};
pub use network::{entropy, softmax, ActorCritic, Architecture, Cache, Network, SCALAR_INPUTS};
pub use optim::RmsProp;
pub use real::Real;
pub use rollout::{argmax, rollout, sample_index, Env, Episode, RewardSpec, RolloutMode, Trajectory};
pub use train::{
    a3c_update, actor_step, bandit, train, train_with, EpochStats, TrainConfig, TrainData, TrainOutput, Trainer,
    UpdateStats,
};

use crate::abr::AbrPolicy;
use crate::error::Result;
use crate::qoe::{BitrateLadder, MetricId, QoeMetric};
use crate::simulator::{Observation, SimConfig, HISTORY_LEN};

/// Scales an observation into network inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub throughput_kbps: f64,
    pub download_s: f64,
    pub size_bits: f64,
    pub buffer_s: f64,
    pub total_chunks: f64,
    /// Last-rung encoding per rung: hd quality over 50.
    pub last_rung: Vec<f64>,
}

impl Normalizer {
    pub fn new(ladder: &BitrateLadder, config: &SimConfig) -> Self {
        let hd = QoeMetric::builtin(MetricId::Hd);
        let top = ladder.bitrate_kbps(ladder.top()).expect("ladder non-empty");
        Self {
            throughput_kbps: 10_000.0,
            download_s: 10.0,
            size_bits: top * 1000.0 * config.chunk_duration_s,
            buffer_s: config.buffer_capacity_s,
            total_chunks: config.total_chunks as f64,
            last_rung: (0..ladder.len())
                .map(|r| hd.quality(ladder, r).expect("rung within ladder") / 50.0)
                .collect(),
        }
    }

    pub fn actions(&self) -> usize {
        self.last_rung.len()
    }

    pub fn input_dim(&self) -> usize {
        2 * HISTORY_LEN + self.actions() + SCALAR_INPUTS
    }

    /// Writes the bundle into `out` (length [`Normalizer::input_dim`]).
    pub fn write<T: Real>(&self, obs: &Observation, out: &mut [T]) {
        let a = self.actions();
        let mut i = 0;
        for &v in &obs.past_throughputs_kbps {
            out[i] = T::lit(v / self.throughput_kbps);
            i += 1;
        }
        for &v in &obs.past_download_times_s {
            out[i] = T::lit(v / self.download_s);
            i += 1;
        }
        for r in 0..a {
            let bits = obs.next_chunk_bits.get(r).copied().unwrap_or(0.0);
            out[i] = T::lit(bits / self.size_bits);
            i += 1;
        }
        out[i] = T::lit(obs.buffer_s / self.buffer_s);
        out[i + 1] = T::lit(obs.chunks_remaining as f64 / self.total_chunks);
        out[i + 2] = T::lit(obs.last_rung.and_then(|r| self.last_rung.get(r).copied()).unwrap_or(0.0));
    }

    pub fn apply(&self, obs: &Observation) -> Vec<f64> {
        let mut out = vec![0.0; self.input_dim()];
        self.write(obs, &mut out);
        out
    }
}

/// Network input bundle for `obs` under `ladder` and `config`.
pub fn normalize_observation(obs: &Observation, ladder: &BitrateLadder, config: &SimConfig) -> Vec<f64> {
    Normalizer::new(ladder, config).apply(obs)
}

/// A trained actor acting greedily.
#[derive(Debug, Clone)]
pub struct RlPolicy {
    actor: Network<f32>,
    normalizer: Normalizer,
    ladder: BitrateLadder,
    input: Vec<f32>,
}

impl RlPolicy {
    pub fn new(actor: Network<f32>, normalizer: Normalizer, ladder: BitrateLadder) -> Self {
        let input = vec![0.0; normalizer.input_dim()];
        Self {
            actor,
            normalizer,
            ladder,
            input,
        }
    }

    /// Evaluation keeps the checkpoint's input scaling except for the
    /// remaining-chunk count, which follows the evaluated video.
    pub fn from_checkpoint(ckpt: &Checkpoint, config: &SimConfig) -> Result<Self> {
        let mut normalizer = ckpt.meta.normalizer.clone();
        normalizer.total_chunks = config.total_chunks as f64;
        let actor = Network::from_params(ckpt.meta.architecture, ckpt.meta.architecture.actions, ckpt.actor.clone())?;
        Ok(Self::new(actor, normalizer, ckpt.meta.ladder.clone()))
    }

    pub fn load(path: &Path, config: &SimConfig) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?, config)
    }

    pub fn ladder(&self) -> &BitrateLadder {
        &self.ladder
    }

    pub fn probabilities(&mut self, obs: &Observation) -> Vec<f64> {
        self.normalizer.write(obs, &mut self.input);
        let logits = self.actor.forward(&self.input, 1).out;
        softmax(&logits).into_iter().map(f64::from).collect()
    }
}

impl AbrPolicy for RlPolicy {
    fn name(&self) -> &str {
        "rl"
    }

    /// Non-finite logits (a corrupted actor) yield an out-of-range rung,
    /// which the simulator reports as a policy fault.
    fn decide(&mut self, obs: &Observation, _ladder: &BitrateLadder) -> usize {
        self.normalizer.write(obs, &mut self.input);
        let logits = self.actor.forward(&self.input, 1).out;
        if logits.iter().any(|l| !l.is_finite()) {
            return logits.len();
        }
        argmax(&logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abr::testutil::obs;

    #[test]
    fn zero_observation_zero_bundle() {
        let l = BitrateLadder::uhd();
        let c = SimConfig::default();
        let mut o = obs(0.0, &[], vec![0.0; 10]);
        o.chunks_remaining = 0;
        assert!(normalize_observation(&o, &l, &c).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_examples() {
        let l = BitrateLadder::uhd();
        let c = SimConfig::default();
        let mut o = obs(24.0, &[22_222.0], vec![75_000_000.0; 10]);
        o.last_rung = Some(7);
        o.chunks_remaining = 195;
        let v = normalize_observation(&o, &l, &c);
        assert!((v[7] - 2.2222).abs() < 1e-12);
        assert!((v[15] - 0.1).abs() < 1e-12);
        assert_eq!(v[16], 1.0);
        assert_eq!(v[26], 1.0);
        assert_eq!(v[27], 0.5);
        assert_eq!(v[28], 2160.0 / 4320.0);
    }
}
