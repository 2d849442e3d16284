//! Synchronous advantage actor-critic training.
//!
//! One epoch: every worker plays one randomly chosen trace window from a
//! random offset with the current policy, the gradients from all workers'
//! trajectories are summed, and a single RMSProp step is applied to each
//! network.

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointMeta, CheckpointSummary, OptimizerState};
use super::network::{entropy, softmax, ActorCritic, Architecture, Network};
use super::optim::RmsProp;
use super::real::Real;
use super::rollout::{lockstep, sample_index, Env, Episode, RewardSpec, RolloutMode, Trajectory};
use crate::error::{Error, Result};
use crate::qoe::{session_qoe, BitrateLadder, MetricId, QoeMetric};
use crate::simulator::{SimConfig, HISTORY_LEN};
use crate::traces::ThroughputTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub entropy_start: f64,
    pub entropy_end: f64,
    /// Epochs over which the entropy weight decays linearly; defaults to
    /// `epochs`.
    pub entropy_decay_epochs: Option<usize>,
    pub workers: usize,
    pub epochs: usize,
    pub reward: RewardSpec,
    /// Multiplies rewards before returns are formed.
    pub reward_scale: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub filters: usize,
    pub hidden: usize,
    pub kernel: usize,
    /// Chunks per training episode.
    pub episode_chunks: usize,
    /// Probability that a worker draws from the mix-in trace set.
    pub mix_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            actor_lr: 5e-5,
            critic_lr: 1e-3,
            gamma: 0.99,
            entropy_start: 1.0,
            entropy_end: 0.1,
            entropy_decay_epochs: None,
            workers: 8,
            epochs: 2000,
            reward: RewardSpec::pensieve_5g(),
            reward_scale: 0.1,
            seed: 42,
            checkpoint_every: 100,
            filters: 320,
            hidden: 320,
            kernel: 4,
            episode_chunks: 100,
            mix_weight: 0.1,
        }
    }
}

impl TrainConfig {
    /// The original 6-rung recipe: 128 units, actor lr 1e-4, linear reward.
    pub fn original() -> Self {
        Self {
            actor_lr: 1e-4,
            filters: 128,
            hidden: 128,
            reward: RewardSpec::original(),
            // linear rewards top out at 4.3 per chunk already
            reward_scale: 1.0,
            ..Self::default()
        }
    }

    /// Ladder and simulator the original recipe trains against.
    pub fn original_setting() -> (BitrateLadder, SimConfig) {
        (
            BitrateLadder::legacy(),
            SimConfig {
                chunk_duration_s: 4.0,
                buffer_capacity_s: 60.0,
                pause_on_full_ms: 500,
                total_chunks: 48,
                ..SimConfig::default()
            },
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.workers == 0 || self.episode_chunks == 0 || self.checkpoint_every == 0 {
            return bad("workers, episode_chunks and checkpoint_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.mix_weight) {
            return bad("mix_weight must lie in [0, 1]");
        }
        if !(self.reward_scale > 0.0) || !(self.entropy_start >= 0.0 && self.entropy_end >= 0.0) {
            return bad("reward_scale must be positive and entropy weights non-negative");
        }
        Ok(())
    }

    pub fn architecture(&self, actions: usize) -> Architecture {
        Architecture {
            filters: self.filters,
            kernel: self.kernel,
            hidden: self.hidden,
            history: HISTORY_LEN,
            actions,
        }
    }

    pub fn entropy_weight(&self, epoch: usize) -> f64 {
        let span = self.entropy_decay_epochs.unwrap_or(self.epochs).max(1);
        let frac = (epoch as f64 / span as f64).min(1.0);
        self.entropy_start + (self.entropy_end - self.entropy_start) * frac
    }
}

/// Trace sets for training; `mix` is the legacy-network mix-in.
#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub train: Vec<ThroughputTrace>,
    pub mix: Vec<ThroughputTrace>,
    pub validation: Vec<ThroughputTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub samples: usize,
    /// Mean per-step reward before scaling.
    pub mean_reward: f64,
    pub mean_entropy: f64,
    pub mean_advantage: f64,
    pub critic_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub entropy_weight: f64,
    pub update: Option<UpdateStats>,
    pub validation_qoe: Option<f64>,
}

fn check_finite<T: Real>(what: &str, grad: &[T]) -> Result<()> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFault(format!("non-finite {what} gradient")))
    }
}

/// Gradient of `−(Σ A·log π(a|s) + β·Σ H(π(·|s)))` and the summed entropy.
fn actor_gradient<T: Real>(
    actor: &Network<T>,
    inputs: &[T],
    actions: &[usize],
    advantages: &[f64],
    entropy_weight: f64,
) -> (Vec<T>, f64) {
    let n = actions.len();
    let a = actor.outputs();
    let cache = actor.forward(inputs, n);
    let mut d_out = vec![T::zero(); n * a];
    let mut total_entropy = 0.0;
    for i in 0..n {
        let p: Vec<f64> = softmax(&cache.out[i * a..(i + 1) * a]).into_iter().map(Real::as_f64).collect();
        let h = entropy(&p);
        total_entropy += h;
        for j in 0..a {
            let onehot = if j == actions[i] { 1.0 } else { 0.0 };
            let ent = if p[j] > 0.0 { p[j] * (p[j].ln() + h) } else { 0.0 };
            d_out[i * a + j] = T::lit(advantages[i] * (p[j] - onehot) + entropy_weight * ent);
        }
    }
    let mut grad = vec![T::zero(); actor.len()];
    actor.backward(inputs, &cache, &d_out, &mut grad);
    (grad, total_entropy)
}

/// One policy-gradient step on the actor alone with given advantages.
/// Returns the mean entropy before the step.
pub fn actor_step<T: Real>(
    actor: &mut Network<T>,
    opt: &mut RmsProp<T>,
    inputs: &[T],
    actions: &[usize],
    advantages: &[f64],
    entropy_weight: f64,
) -> Result<f64> {
    if actions.is_empty() {
        return Err(Error::NoData("empty batch".into()));
    }
    let (grad, h) = actor_gradient(actor, inputs, actions, advantages, entropy_weight);
    check_finite("actor", &grad)?;
    opt.step(actor.params_mut(), &grad);
    Ok(h / actions.len() as f64)
}

/// Discounted returns of one trajectory with the episode ending at its
/// last step.
fn returns(rewards: &[f64], gamma: f64, scale: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r * scale + gamma * acc;
        *o = acc;
    }
    out
}

/// Sums actor and critic gradients over all trajectories and applies one
/// step to each. Nothing is applied when any gradient is non-finite.
pub fn a3c_update<T: Real>(
    net: &mut ActorCritic<T>,
    actor_opt: &mut RmsProp<T>,
    critic_opt: &mut RmsProp<T>,
    trajectories: &[Trajectory<T>],
    gamma: f64,
    entropy_weight: f64,
    reward_scale: f64,
) -> Result<UpdateStats> {
    let n: usize = trajectories.iter().map(Trajectory::len).sum();
    if n == 0 {
        return Err(Error::NoData("no trajectory steps".into()));
    }
    let d = net.architecture().input_dim();
    let mut inputs = Vec::with_capacity(n * d);
    let mut actions = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    let mut reward_sum = 0.0;
    for t in trajectories {
        inputs.extend_from_slice(&t.inputs);
        actions.extend_from_slice(&t.actions);
        targets.extend(returns(&t.rewards, gamma, reward_scale));
        reward_sum += t.total_reward();
    }
    assert_eq!(inputs.len(), n * d, "trajectory inputs");

    let critic_cache = net.critic.forward(&inputs, n);
    let advantages: Vec<f64> = targets
        .iter()
        .zip(&critic_cache.out)
        .map(|(r, v)| r - v.as_f64())
        .collect();
    let d_value: Vec<T> = advantages.iter().map(|&adv| T::lit(-2.0 * adv)).collect();
    let mut critic_grad = vec![T::zero(); net.critic.len()];
    net.critic.backward(&inputs, &critic_cache, &d_value, &mut critic_grad);

    let (actor_grad, entropy_sum) = actor_gradient(&net.actor, &inputs, &actions, &advantages, entropy_weight);
    check_finite("critic", &critic_grad)?;
    check_finite("actor", &actor_grad)?;
    actor_opt.step(net.actor.params_mut(), &actor_grad);
    critic_opt.step(net.critic.params_mut(), &critic_grad);

    let nf = n as f64;
    Ok(UpdateStats {
        samples: n,
        mean_reward: reward_sum / nf,
        mean_entropy: entropy_sum / nf,
        mean_advantage: advantages.iter().sum::<f64>() / nf,
        critic_loss: advantages.iter().map(|a| a * a).sum::<f64>() / nf,
    })
}

/// Training state; everything needed to continue bit-exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    env: Env,
    validation_env: Env,
    net: ActorCritic<f32>,
    actor_opt: RmsProp<f32>,
    critic_opt: RmsProp<f32>,
    epoch: usize,
}

impl Trainer {
    pub fn new(ladder: &BitrateLadder, sim: &SimConfig, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        sim.validate()?;
        let arch = config.architecture(ladder.len());
        arch.validate()?;
        let net = ActorCritic::new(arch, config.seed);
        let actor_opt = RmsProp::new(config.actor_lr, net.actor.len());
        let critic_opt = RmsProp::new(config.critic_lr, net.critic.len());
        Ok(Self::assemble(ladder, sim, config, net, actor_opt, critic_opt, 0))
    }

    fn assemble(
        ladder: &BitrateLadder,
        sim: &SimConfig,
        config: &TrainConfig,
        net: ActorCritic<f32>,
        actor_opt: RmsProp<f32>,
        critic_opt: RmsProp<f32>,
        epoch: usize,
    ) -> Self {
        let episode_sim = SimConfig {
            total_chunks: config.episode_chunks,
            ..sim.clone()
        };
        let mut env = Env::new(ladder.clone(), episode_sim, config.reward.clone());
        // inputs are scaled the same way in training and validation
        env.normalizer = super::Normalizer::new(ladder, sim);
        env.normalizer.total_chunks = config.episode_chunks as f64;
        let validation_env = Env::new(ladder.clone(), sim.clone(), config.reward.clone());
        Self {
            config: config.clone(),
            env,
            validation_env,
            net,
            actor_opt,
            critic_opt,
            epoch,
        }
    }

    /// Continues from a checkpoint that carries optimizer state. `epochs`
    /// may be raised to train further.
    pub fn resume(ckpt: &Checkpoint, epochs: Option<usize>) -> Result<Self> {
        let meta = &ckpt.meta;
        let opt = ckpt
            .optimizer
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("checkpoint has no optimizer state to resume from".into()))?;
        let mut config = meta.train.clone();
        if let Some(e) = epochs {
            config.epochs = e;
        }
        let arch = meta.architecture;
        let net = ActorCritic {
            actor: Network::from_params(arch, arch.actions, ckpt.actor.clone())?,
            critic: Network::from_params(arch, 1, ckpt.critic.clone())?,
        };
        if opt.actor.len() != net.actor.len() || opt.critic.len() != net.critic.len() {
            return Err(Error::Checkpoint("optimizer state does not match parameters".into()));
        }
        let actor_opt = RmsProp::new(config.actor_lr, 0).with_state(opt.actor.clone());
        let critic_opt = RmsProp::new(config.critic_lr, 0).with_state(opt.critic.clone());
        Ok(Self::assemble(&meta.ladder, &meta.sim, &config, net, actor_opt, critic_opt, meta.epoch))
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn network(&self) -> &ActorCritic<f32> {
        &self.net
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn worker_rng(&self, worker: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(((self.epoch as u64) << 20) | worker as u64);
        rng
    }

    /// Rolls out every worker once and applies the summed update.
    pub fn run_epoch(&mut self, data: &TrainData) -> Result<EpochStats> {
        if data.train.is_empty() {
            return Err(Error::NoData("training trace set is empty".into()));
        }
        let mut rngs: Vec<ChaCha8Rng> = (0..self.config.workers).map(|w| self.worker_rng(w)).collect();
        let episodes: Vec<Episode<'_>> = rngs
            .iter_mut()
            .map(|rng| {
                let pool = if !data.mix.is_empty() && rng.random::<f64>() < self.config.mix_weight {
                    &data.mix
                } else {
                    &data.train
                };
                let trace = &pool[rng.random_range(0..pool.len())];
                let start_s = rng.random::<f64>() * trace.duration_s();
                Episode { trace, start_s }
            })
            .collect();
        let trajectories = lockstep(&self.net.actor, &episodes, &self.env, RolloutMode::Sample, &mut rngs)?;
        let beta = self.config.entropy_weight(self.epoch);
        let update = match a3c_update(
            &mut self.net,
            &mut self.actor_opt,
            &mut self.critic_opt,
            &trajectories,
            self.config.gamma,
            beta,
            self.config.reward_scale,
        ) {
            Ok(s) => Some(s),
            Err(Error::NumericalFault(m)) => {
                warn!("epoch {}: update skipped: {m}", self.epoch + 1);
                None
            }
            Err(e) => return Err(e),
        };
        self.epoch += 1;
        if let Some(u) = &update {
            debug!(
                "epoch {} reward {:.3} entropy {:.3} critic {:.3}",
                self.epoch, u.mean_reward, u.mean_entropy, u.critic_loss
            );
        }
        Ok(EpochStats {
            epoch: self.epoch,
            entropy_weight: beta,
            update,
            validation_qoe: None,
        })
    }

    /// Mean hd QoE (table μ) of greedy sessions over the validation traces.
    pub fn validate(&self, traces: &[ThroughputTrace]) -> Result<f64> {
        if traces.is_empty() {
            return Err(Error::NoData("validation trace set is empty".into()));
        }
        let episodes: Vec<Episode<'_>> = traces.iter().map(|trace| Episode { trace, start_s: 0.0 }).collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..traces.len()).map(|i| ChaCha8Rng::seed_from_u64(i as u64)).collect();
        let mut env = self.validation_env.clone();
        env.normalizer = self.env.normalizer.clone();
        env.normalizer.total_chunks = env.sim.total_chunks as f64;
        let runs = lockstep(&self.net.actor, &episodes, &env, RolloutMode::Argmax, &mut rngs)?;
        let metric = QoeMetric::builtin(MetricId::Hd);
        let mut total = 0.0;
        for r in &runs {
            total += session_qoe(&metric, &env.ladder, &r.record)?;
        }
        Ok(total / runs.len() as f64)
    }

    pub fn checkpoint(&self, validation_qoe: Option<f64>) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                epoch: self.epoch,
                validation_qoe,
                seed: self.config.seed,
                architecture: *self.net.architecture(),
                ladder: self.validation_env.ladder.clone(),
                normalizer: self.env.normalizer.clone(),
                train: self.config.clone(),
                sim: self.validation_env.sim.clone(),
            },
            actor: self.net.actor.params().to_vec(),
            critic: self.net.critic.params().to_vec(),
            optimizer: Some(OptimizerState {
                actor: self.actor_opt.state().to_vec(),
                critic: self.critic_opt.state().to_vec(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Every evaluated checkpoint in epoch order.
    pub summaries: Vec<CheckpointSummary>,
    /// Index into `summaries` of the best validation score.
    pub best_index: usize,
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochStats>,
}

/// Trains from scratch.
pub fn train(data: &TrainData, ladder: &BitrateLadder, sim: &SimConfig, config: &TrainConfig) -> Result<TrainOutput> {
    train_with(Trainer::new(ladder, sim, config)?, data, &mut |_| Ok(()))
}

/// Runs `trainer` to its configured epoch count, validating at the start
/// and every `checkpoint_every` epochs (and at the end). `on_checkpoint`
/// sees every checkpoint as it is produced.
pub fn train_with(
    mut trainer: Trainer,
    data: &TrainData,
    on_checkpoint: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<TrainOutput> {
    if data.train.is_empty() {
        return Err(Error::NoData("training trace set is empty".into()));
    }
    let mut summaries = Vec::new();
    let mut log = Vec::new();
    let first = trainer.checkpoint(Some(trainer.validate(&data.validation)?));
    on_checkpoint(&first)?;
    summaries.push(first.summary()?);
    let mut best_index = 0;
    let mut best = first.clone();
    let mut last = first;
    while !trainer.is_done() {
        let mut stats = trainer.run_epoch(data)?;
        let e = trainer.epoch();
        if e % trainer.config.checkpoint_every == 0 || trainer.is_done() {
            let v = trainer.validate(&data.validation)?;
            stats.validation_qoe = Some(v);
            let ck = trainer.checkpoint(Some(v));
            on_checkpoint(&ck)?;
            summaries.push(ck.summary()?);
            info!("epoch {e}: validation qoe {v:.2}");
            if v > best.meta.validation_qoe.unwrap_or(f64::NEG_INFINITY) {
                best_index = summaries.len() - 1;
                best = ck.clone();
            }
            last = ck;
        }
        log.push(stats);
    }
    Ok(TrainOutput {
        summaries,
        best_index,
        best,
        last,
        log,
    })
}

/// Outcome of a bandit run.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditRun {
    /// Updates applied when the target was first met, if it was.
    pub updates_to_target: Option<usize>,
    pub final_probabilities: Vec<f64>,
}

/// Multi-armed bandit with fixed per-arm rewards on a fixed input: each
/// update pulls one arm from the current policy and applies a single-step
/// actor-critic update. Stops once arm `target_arm` has probability above
/// `target_p` or after `max_updates`.
#[allow(clippy::too_many_arguments)]
pub fn bandit(
    arch: Architecture,
    rewards: &[f64],
    config: &TrainConfig,
    entropy_weight: f64,
    target_arm: usize,
    target_p: f64,
    max_updates: usize,
    seed: u64,
) -> Result<BanditRun> {
    if arch.actions != rewards.len() {
        return Err(Error::Config("one reward per action required".into()));
    }
    let mut net = ActorCritic::<f32>::new(arch, seed);
    let mut actor_opt = RmsProp::new(config.actor_lr, net.actor.len());
    let mut critic_opt = RmsProp::new(config.critic_lr, net.critic.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let input: Vec<f32> = (0..arch.input_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
    let probs = |net: &ActorCritic<f32>| -> Vec<f64> {
        softmax(&net.actor.forward(&input, 1).out).into_iter().map(f64::from).collect()
    };
    for step in 0..max_updates {
        let p = probs(&net);
        if p[target_arm] > target_p {
            return Ok(BanditRun {
                updates_to_target: Some(step),
                final_probabilities: p,
            });
        }
        let arm = sample_index(&p, rng.random::<f64>());
        let t = Trajectory {
            inputs: input.clone(),
            actions: vec![arm],
            rewards: vec![rewards[arm]],
            ..Trajectory::default()
        };
        a3c_update(&mut net, &mut actor_opt, &mut critic_opt, &[t], config.gamma, entropy_weight, 1.0)?;
    }
    let p = probs(&net);
    Ok(BanditRun {
        updates_to_target: (p[target_arm] > target_p).then_some(max_updates),
        final_probabilities: p,
    })
}
