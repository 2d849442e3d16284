//! Conventional ABR baselines behind a uniform decision interface.

mod bb;
mod bola;
mod mpc;
mod rb;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qoe::{BitrateLadder, MetricId};
use crate::simulator::{Observation, SimConfig};

pub use bb::{bb_decide, BbParams, BufferBased};
pub use bola::{bola_decide, Bola, BolaCalibration, BolaParams};
pub use mpc::{harmonic_mean, Mpc, MpcModel, MpcParams};
pub use rb::{rb_decide, RateBased, RbParams};

/// A bitrate-selection policy. Implementations must be total: every valid
/// observation maps to a rung of `ladder`.
pub trait AbrPolicy {
    fn name(&self) -> &str;

    fn decide(&mut self, obs: &Observation, ladder: &BitrateLadder) -> usize;

    /// Clears per-session state.
    fn reset(&mut self) {}
}

impl<P: AbrPolicy + ?Sized> AbrPolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&mut self, obs: &Observation, ladder: &BitrateLadder) -> usize {
        (**self).decide(obs, ladder)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

/// Free-function form of [`AbrPolicy::decide`].
pub fn decide<P: AbrPolicy + ?Sized>(policy: &mut P, obs: &Observation, ladder: &BitrateLadder) -> usize {
    policy.decide(obs, ladder)
}

/// Always picks the same rung.
#[derive(Debug, Clone, Copy)]
pub struct FixedRung(pub usize);

impl AbrPolicy for FixedRung {
    fn name(&self) -> &str {
        "fixed"
    }

    fn decide(&mut self, _obs: &Observation, _ladder: &BitrateLadder) -> usize {
        self.0
    }
}

/// Always picks the top rung of whatever ladder it is given.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyTop;

impl AbrPolicy for GreedyTop {
    fn name(&self) -> &str {
        "greedy-top"
    }

    fn decide(&mut self, _obs: &Observation, ladder: &BitrateLadder) -> usize {
        ladder.top()
    }
}

/// Policy selection as it appears in experiment plans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Bb(#[serde(default)] BbParams),
    Rb(#[serde(default)] RbParams),
    Bola(#[serde(default)] BolaParams),
    Mpc {
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_metric")]
        metric: MetricId,
    },
    RobustMpc {
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_metric")]
        metric: MetricId,
    },
    Rl {
        checkpoint: PathBuf,
    },
}

fn default_horizon() -> usize {
    5
}

fn default_metric() -> MetricId {
    MetricId::Hd
}

impl PolicyKind {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::Bb(_) => "bb",
            PolicyKind::Rb(_) => "rb",
            PolicyKind::Bola(_) => "bola",
            PolicyKind::Mpc { .. } => "mpc",
            PolicyKind::RobustMpc { .. } => "robust_mpc",
            PolicyKind::Rl { .. } => "rl",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, PolicyKind::Rl { .. })
    }

    /// Instantiates a fresh policy (one per session). Learned policies load
    /// their checkpoint and bring their own ladder, returned alongside.
    pub fn build(
        &self,
        ladder: &BitrateLadder,
        config: &SimConfig,
    ) -> Result<(Box<dyn AbrPolicy + Send>, BitrateLadder)> {
        let policy: Box<dyn AbrPolicy + Send> = match self {
            PolicyKind::Bb(p) => Box::new(BufferBased::new(*p)),
            PolicyKind::Rb(p) => Box::new(RateBased::new(*p)),
            PolicyKind::Bola(p) => Box::new(Bola::new(*p, ladder, config)?),
            PolicyKind::Mpc { horizon, metric } => Box::new(Mpc::new(MpcParams {
                horizon: *horizon,
                robust: false,
                ..MpcParams::for_config(config, *metric)
            })),
            PolicyKind::RobustMpc { horizon, metric } => Box::new(Mpc::new(MpcParams {
                horizon: *horizon,
                robust: true,
                ..MpcParams::for_config(config, *metric)
            })),
            PolicyKind::Rl { checkpoint } => {
                let policy = crate::rl::RlPolicy::load(checkpoint, config)?;
                let ladder = policy.ladder().clone();
                return Ok((Box::new(policy), ladder));
            }
        };
        Ok((policy, ladder.clone()))
    }
}
