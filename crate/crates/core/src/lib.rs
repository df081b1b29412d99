//! Privacy-aware task offloading from a ground user to a moving LEO
//! constellation.
//!
//! The crate is layered bottom-up:
//!
//! * [`config`], [`model`]: scenario parameters, tasks and schedules
//! * [`channel`], [`constellation`]: coverage geometry and the link budget
//! * [`timeline`], [`metrics`]: deterministic schedule evaluation and cost
//! * [`env`]: the sequential decision environment built on the evaluator
//! * [`nn`], [`rl`]: a small dense-network kernel and the PPO / DQN trainers
//! * [`baselines`]: random, uniform and exhaustive reference policies
//! * [`harness`]: the logic behind the `satoffload` command-line tool

pub mod baselines;
pub mod channel;
pub mod config;
pub mod constellation;
pub mod env;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rl;
pub mod timeline;

pub use config::{ConfigError, ScenarioConfig};
pub use metrics::EvaluationReport;
pub use model::{Decision, Location, Schedule, Task};
pub use timeline::{evaluate_partial, evaluate_schedule, EvalError};
