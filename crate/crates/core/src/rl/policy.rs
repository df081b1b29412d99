use std::io::Write;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::env::{ActionMask, EnvAction, EnvError, EnvOptions, EnvState, OffloadEnv};
use crate::metrics::EvaluationReport;
use crate::model::Schedule;
use crate::nn::{Categorical, Checkpoint, Mlp};

use super::RlError;

/// Anything that picks an action from an observation.
pub trait Policy {
    fn select(&self, state: &EnvState) -> EnvAction;
}

/// Actor over three masked heads: task, location, redundancy.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredActor {
    pub net: Mlp,
    pub n_max: usize,
    pub m_max: usize,
}

impl FactoredActor {
    pub fn head_sizes(&self) -> [usize; 3] {
        [self.n_max, self.m_max + 1, 2]
    }

    /// Splits a logit vector into the three masked heads.
    pub fn heads(&self, logits: &[f64], mask: &ActionMask) -> [Categorical; 3] {
        let [a, b, _] = self.head_sizes();
        let (t, rest) = logits.split_at(a);
        let (l, r) = rest.split_at(b);
        [
            Categorical::new(t, &mask.task).expect("an unassigned task remains"),
            Categorical::new(l, &mask.location).expect("local is always allowed"),
            Categorical::new(r, &mask.redundancy).expect("both flags allowed"),
        ]
    }

    pub fn distributions(&self, state: &EnvState) -> [Categorical; 3] {
        let logits = self.net.forward(&state.features()).expect("feature length matches");
        self.heads(&logits, &state.action_mask())
    }
}

impl Policy for FactoredActor {
    fn select(&self, state: &EnvState) -> EnvAction {
        let [t, l, r] = self.distributions(state);
        EnvAction::new(t.argmax(), l.argmax(), r.argmax() == 1)
    }
}

/// Greedy policy over a Q-network on the flattened action space.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    pub net: Mlp,
    pub n_max: usize,
    pub m_max: usize,
}

/// Index of the largest unmasked entry; ties go to the lowest index.
pub fn masked_argmax(values: &[f64], mask: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &m)) in values.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

impl Policy for QPolicy {
    fn select(&self, state: &EnvState) -> EnvAction {
        let q = self.net.forward(&state.features()).expect("feature length matches");
        let idx = masked_argmax(&q, &state.action_mask().flat()).expect("some action is valid");
        EnvAction::from_flat(idx, self.m_max)
    }
}

/// A trained agent restored from a checkpoint.
#[derive(Debug, Clone)]
pub enum TrainedPolicy {
    Ppo(FactoredActor),
    Dqn(QPolicy),
}

impl TrainedPolicy {
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, RlError> {
        let h = &ck.header;
        let feat = EnvState::feature_len(h.n_max, h.m_max);
        let check = |name: &str, outputs: usize| -> Result<Mlp, RlError> {
            let net = ck.net(name).ok_or_else(|| RlError::Checkpoint(format!("missing network `{name}`")))?;
            if net.input_len() != feat || net.output_len() != outputs {
                return Err(RlError::Checkpoint(format!(
                    "network `{name}` has shape {:?}, expected {feat} inputs and {outputs} outputs",
                    net.sizes()
                )));
            }
            Ok(net.clone())
        };
        match h.kind.as_str() {
            "ppo" => Ok(TrainedPolicy::Ppo(FactoredActor {
                net: check("actor", h.n_max + h.m_max + 3)?,
                n_max: h.n_max,
                m_max: h.m_max,
            })),
            "dqn" => Ok(TrainedPolicy::Dqn(QPolicy {
                net: check("q", h.n_max * (h.m_max + 1) * 2)?,
                n_max: h.n_max,
                m_max: h.m_max,
            })),
            other => Err(RlError::Checkpoint(format!("unknown checkpoint kind `{other}`"))),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            TrainedPolicy::Ppo(a) => (a.n_max, a.m_max),
            TrainedPolicy::Dqn(q) => (q.n_max, q.m_max),
        }
    }

    /// Environment padded to the checkpoint's dimensions for `cfg`.
    pub fn env_for(&self, cfg: &ScenarioConfig) -> Result<OffloadEnv, RlError> {
        let (n_max, m_max) = self.dims();
        let opts = EnvOptions {
            n_max,
            m_max,
            ..EnvOptions::for_scenario(cfg)
        };
        OffloadEnv::new(cfg.clone(), opts).map_err(RlError::from)
    }
}

impl Policy for TrainedPolicy {
    fn select(&self, state: &EnvState) -> EnvAction {
        match self {
            TrainedPolicy::Ppo(a) => a.select(state),
            TrainedPolicy::Dqn(q) => q.select(state),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub schedule: Schedule,
    pub report: EvaluationReport,
    pub episode_return: f64,
}

/// Runs one episode choosing every action with `policy`.
pub fn run_episode<P: Policy + ?Sized>(policy: &P, env: &mut OffloadEnv, seed: u64) -> Result<Episode, EnvError> {
    let mut state = env.reset(seed);
    let mut total = 0.0;
    loop {
        let step = env.step(policy.select(&state))?;
        total += step.reward;
        state = step.state;
        if step.done {
            return Ok(Episode {
                schedule: env.schedule().clone(),
                report: step.report,
                episode_return: total,
            });
        }
    }
}

/// One row of a training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRow {
    pub timestep: u64,
    /// Return of the greedy evaluation episode.
    pub mean_return: f64,
    pub mean_cost: f64,
    #[serde(rename = "T_total")]
    pub total_time: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "r_failure")]
    pub failure_prob: f64,
    #[serde(rename = "P_total")]
    pub privacy: f64,
    /// Share of sampled training episodes finished since the previous row that
    /// met every constraint; the greedy episode's feasibility when none finished.
    pub feasible_fraction: f64,
    pub lr: f64,
}

pub const LOG_HEADER: &str = "timestep,mean_return,mean_cost,T_total,E,r_failure,P_total,feasible_fraction,lr";

impl LogRow {
    pub fn from_episode(timestep: u64, ep: &Episode, feasible_fraction: Option<f64>, lr: f64) -> Self {
        Self {
            timestep,
            mean_return: ep.episode_return,
            mean_cost: ep.report.cost,
            total_time: ep.report.total_time,
            energy: ep.report.energy_total(),
            failure_prob: ep.report.failure_prob,
            privacy: ep.report.privacy_total(),
            feasible_fraction: feasible_fraction.unwrap_or(f64::from(u8::from(ep.report.is_feasible()))),
            lr,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.timestep,
            self.mean_return,
            self.mean_cost,
            self.total_time,
            self.energy,
            self.failure_prob,
            self.privacy,
            self.feasible_fraction,
            self.lr
        )
    }
}

/// Writes a training log as CSV, preceded by `comment` lines prefixed with `#`.
pub fn write_log_csv<W: Write>(mut out: W, comment: &[String], rows: &[LogRow]) -> std::io::Result<()> {
    for c in comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{LOG_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_argmax_skips_masked() {
        assert_eq!(masked_argmax(&[5.0, 1.0, 3.0], &[false, true, true]), Some(2));
        assert_eq!(masked_argmax(&[1.0, 1.0], &[true, true]), Some(0));
        assert_eq!(masked_argmax(&[1.0], &[false]), None);
    }
}
