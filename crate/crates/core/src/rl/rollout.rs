//! Playing the actor against the simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{softmax, ActorCritic, Network};
use super::real::Real;
use super::Normalizer;
use crate::error::Result;
use crate::qoe::{chunk_reward_with, BitrateLadder, MetricId, QoeMetric, SessionRecord, Smoothness};
use crate::simulator::{Playback, SimConfig, StreamSession};
use crate::traces::ThroughputTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    Sample,
    Argmax,
}

/// Per-chunk training reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub metric: MetricId,
    pub mu: f64,
    #[serde(default)]
    pub smoothness: Smoothness,
}

impl RewardSpec {
    /// hd quality with a heavy stall penalty.
    pub fn pensieve_5g() -> Self {
        Self {
            metric: MetricId::Hd,
            mu: 80.0,
            smoothness: Smoothness::DowngradeOnly,
        }
    }

    /// Linear bitrate reward with symmetric switching penalty.
    pub fn original() -> Self {
        Self {
            metric: MetricId::Lin,
            mu: 4.3,
            smoothness: Smoothness::Symmetric,
        }
    }

    pub fn reward(&self, ladder: &BitrateLadder, prev: Option<usize>, rung: usize, rebuffer_s: f64) -> Result<f64> {
        chunk_reward_with(
            &QoeMetric::builtin(self.metric),
            ladder,
            prev,
            rung,
            rebuffer_s,
            Some(self.mu),
            self.smoothness,
        )
    }
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self::pensieve_5g()
    }
}

/// What a rollout plays against.
#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    pub ladder: BitrateLadder,
    pub sim: SimConfig,
    pub normalizer: Normalizer,
    pub reward: RewardSpec,
}

impl Env {
    pub fn new(ladder: BitrateLadder, sim: SimConfig, reward: RewardSpec) -> Self {
        let normalizer = Normalizer::new(&ladder, &sim);
        Self {
            ladder,
            sim,
            normalizer,
            reward,
        }
    }
}

/// One session to play: a trace and where in it the first request starts.
#[derive(Debug, Clone, Copy)]
pub struct Episode<'a> {
    pub trace: &'a ThroughputTrace,
    pub start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T = f32> {
    /// Normalised inputs, one row per step.
    pub inputs: Vec<T>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Critic estimates; left empty by training rollouts.
    pub values: Vec<f64>,
    pub record: SessionRecord,
}

impl<T> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// First index of the largest entry.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `probs` with `u` in [0, 1).
pub fn sample_index<T: Real>(probs: &[T], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last
}

/// Plays every episode to completion with all sessions advancing together so
/// each step is one batched forward pass.
pub(crate) fn lockstep<T: Real>(
    actor: &Network<T>,
    episodes: &[Episode<'_>],
    env: &Env,
    mode: RolloutMode,
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<Trajectory<T>>> {
    let n = episodes.len();
    let d = env.normalizer.input_dim();
    let a = env.ladder.len();
    let plays: Vec<Playback<'_>> = episodes
        .iter()
        .map(|e| Playback::new(e.trace, &env.ladder, &env.sim))
        .collect();
    let mut sessions: Vec<StreamSession> = episodes.iter().map(|e| StreamSession::starting_at(e.start_s)).collect();
    let mut out: Vec<Trajectory<T>> = (0..n)
        .map(|_| Trajectory {
            inputs: Vec::with_capacity(env.sim.total_chunks * d),
            ..Trajectory::default()
        })
        .collect();
    let mut x = Vec::new();
    loop {
        let active: Vec<usize> = (0..n).filter(|&i| !sessions[i].is_complete(&env.sim)).collect();
        if active.is_empty() {
            break;
        }
        x.clear();
        x.resize(active.len() * d, T::zero());
        for (row, &i) in active.iter().enumerate() {
            let obs = plays[i].observe(&sessions[i]);
            env.normalizer.write(&obs, &mut x[row * d..(row + 1) * d]);
        }
        let cache = actor.forward(&x, active.len());
        for (row, &i) in active.iter().enumerate() {
            let logits = &cache.out[row * a..(row + 1) * a];
            let action = match mode {
                RolloutMode::Argmax => argmax(logits),
                RolloutMode::Sample => sample_index(&softmax(logits), rngs[i].random::<f64>()),
            };
            let prev = sessions[i].last_rung;
            let outcome = plays[i].download_chunk(&mut sessions[i], action)?;
            let reward = env.reward.reward(&env.ladder, prev, action, outcome.rebuffer_s)?;
            let t = &mut out[i];
            t.inputs.extend_from_slice(&x[row * d..(row + 1) * d]);
            t.actions.push(action);
            t.rewards.push(reward);
            t.record.push(action, outcome.rebuffer_s);
        }
    }
    Ok(out)
}

/// One full session from the start of `trace`, with critic values filled in.
pub fn rollout<T: Real>(
    net: &ActorCritic<T>,
    trace: &ThroughputTrace,
    env: &Env,
    mode: RolloutMode,
    seed: u64,
) -> Result<Trajectory<T>> {
    let mut rngs = vec![ChaCha8Rng::seed_from_u64(seed)];
    let episode = Episode { trace, start_s: 0.0 };
    let mut t = lockstep(&net.actor, &[episode], env, mode, &mut rngs)?
        .pop()
        .expect("one episode");
    let values = net.critic.forward(&t.inputs, t.len()).out;
    t.values = values.into_iter().map(Real::as_f64).collect();
    Ok(t)
}
