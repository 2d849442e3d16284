//! Trace-driven adaptive-bitrate streaming toolkit for 5G-class networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`traces`]: throughput traces (CSV and Mahimahi formats, windowing,
//!   Markov-chain synthesis) and the piecewise-constant integrator that the
//!   download model is built on.
//! - [`qoe`]: the UHD bitrate ladder, the six quality functions and
//!   session scoring with downgrade-only smoothness penalties.
//! - [`simulator`]: chunk-level playback with pause-on-full buffer control.
//! - [`abr`]: BB, RB, BOLA, MPC and robustMPC behind one [`abr::AbrPolicy`]
//!   trait.
//! - [`rl`]: the actor-critic policy network with hand-written backprop,
//!   synchronous advantage actor-critic training and checkpoints.
//! - [`experiment`]: experiment plans, the evaluation matrix, result tables
//!   and normalisation against a reference algorithm.

pub mod abr;
pub mod error;
pub mod experiment;
pub mod qoe;
pub mod reference;
pub mod rl;
pub mod scenarios;
pub mod simulator;
pub mod traces;

pub use error::{Error, Result};
pub use qoe::{BitrateLadder, MetricId, QoeMetric, Representation, SessionRecord};
pub use simulator::{ChunkOutcome, Observation, SimConfig, StreamSession};
pub use traces::{SyntheticSpec, ThroughputTrace, TraceSource};
