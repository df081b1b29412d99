//! PPO and DQN trainers on the offloading environment.

mod dqn;
mod gae;
mod policy;
mod ppo;
mod schedule;

use thiserror::Error;

use crate::env::EnvError;
use crate::metrics::EvaluationReport;
use crate::model::Schedule;
use crate::nn::{Checkpoint, ShapeError};

pub use dqn::{td_target, train_dqn, DqnHyper};
pub use gae::compute_gae;
pub use policy::{
    masked_argmax, run_episode, write_log_csv, Episode, FactoredActor, LogRow, Policy, QPolicy, TrainedPolicy,
    LOG_HEADER,
};
pub use ppo::{train_ppo, PpoAgent, PpoHyper, RolloutBuffer, UpdateStats};
pub use schedule::LrSchedule;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("training diverged: {0}")]
    NonFinite(String),
    #[error("incompatible checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    /// Greedy schedule of the final policy and its evaluation.
    pub schedule: Schedule,
    pub report: EvaluationReport,
}

/// Rescales `grads` so its Euclidean norm is at most `max_norm`.
pub(crate) fn clip_grad_norm(grads: &mut [f64], max_norm: f64) {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
}
