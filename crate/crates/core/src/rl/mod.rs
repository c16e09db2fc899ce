//! Hand-written function approximation and the double-DQN and clipped-PPO
//! trainers.

mod checkpoint;
mod dqn;
pub mod fixtures;
mod market;
mod mlp;
mod ppo;
mod replay;

pub use checkpoint::{Checkpoint, CheckpointError, TrainerKind};
pub use dqn::{dqn_loss, dqn_train, epsilon_at, DqnConfig, DqnLossStats, DqnOutcome};
pub use market::{GreedyNetPolicy, MarketEnvConfig, MarketMakingEnv, TickFeed};
pub use mlp::{clip_grad_norm, Adam, ForwardCache, Mlp};
pub use ppo::{
    gae_advantages, log_softmax, ppo_loss, ppo_train, ppo_update, GaeStep, PpoConfig, PpoLossStats, PpoOutcome,
    PpoSample, PpoUpdateStats,
};
pub use replay::{ReplayBuffer, Transition};

use serde::Serialize;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum RlError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad architecture: {0}")]
    Architecture(String),
    #[error("action {action} out of range for {count} actions")]
    BadAction { action: usize, count: usize },
    /// Training produced a non-finite loss, ratio or parameter. The
    /// checkpoint holds the state just before the failing update.
    #[error("training diverged at step {step}: {what}")]
    Diverged {
        step: u64,
        what: String,
        checkpoint: Box<Checkpoint>,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("environment cannot start an episode")]
    EnvExhausted,
}

/// Result of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Terminal: no bootstrapping past this step.
    pub done: bool,
    /// Cut off without reaching a terminal state.
    pub truncated: bool,
}

/// Episodic environment with a discrete action set.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Starts an episode and returns its first observation, or `None` when
    /// no further episode can be started.
    fn reset(&mut self) -> Option<Vec<f64>>;
    fn step(&mut self, action: usize) -> Step;
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// One row of a training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainLogRow {
    pub episode: u64,
    /// Environment steps taken when the episode ended.
    pub steps: u64,
    pub reward: f64,
    /// Mean absolute TD error (DQN) or policy entropy (PPO) of the updates
    /// made during the episode.
    pub diagnostic: Option<f64>,
    /// Exploration rate (DQN) or clip fraction (PPO).
    pub schedule: Option<f64>,
}

pub fn write_train_log<W: Write>(rows: &[TrainLogRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["episode", "steps", "reward", "diagnostic", "schedule"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.steps.to_string(),
            format!("{}", r.reward),
            opt(r.diagnostic),
            opt(r.schedule),
        ])?;
    }
    w.flush()?;
    Ok(())
}
