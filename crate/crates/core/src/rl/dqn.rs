//! Deep Q-learning over the flattened action space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::env::{EnvAction, EnvOptions, OffloadEnv};
use crate::nn::{Adam, AdamHyper, Checkpoint, Mlp};

use super::policy::{masked_argmax, run_episode, LogRow, QPolicy};
use super::schedule::LrSchedule;
use super::{clip_grad_norm, RlError, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnHyper {
    pub gamma: f64,
    pub lr: LrSchedule,
    pub total_steps: u64,
    pub buffer_capacity: usize,
    pub batch: usize,
    /// Steps of pure exploration before the first gradient step.
    pub learning_starts: u64,
    pub target_update: u64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of training over which epsilon decays linearly.
    pub eps_fraction: f64,
    pub hidden: Vec<usize>,
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    pub penalty: Option<f64>,
    pub n_max: Option<usize>,
    pub m_max: Option<usize>,
    /// Steps between log rows.
    pub log_interval: u64,
}

impl Default for DqnHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: LrSchedule::default_decay(),
            total_steps: 1_000_000,
            buffer_capacity: 50_000,
            batch: 64,
            learning_starts: 1_000,
            target_update: 500,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_fraction: 0.3,
            hidden: vec![64, 64],
            reward_scale: 0.01,
            max_grad_norm: 10.0,
            penalty: None,
            n_max: None,
            m_max: None,
            log_interval: 2048,
        }
    }
}

impl DqnHyper {
    pub fn env_options(&self, cfg: &ScenarioConfig) -> EnvOptions {
        let base = EnvOptions::for_scenario(cfg);
        EnvOptions {
            n_max: self.n_max.unwrap_or(base.n_max),
            m_max: self.m_max.unwrap_or(base.m_max),
            penalty: self.penalty.unwrap_or(base.penalty),
            ..base
        }
    }

    pub fn epsilon(&self, t: u64) -> f64 {
        let span = self.eps_fraction * self.total_steps as f64;
        if span <= 0.0 {
            return self.eps_end;
        }
        let frac = t as f64 / span;
        if frac >= 1.0 {
            return self.eps_end;
        }
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

#[derive(Debug, Clone)]
struct Transition {
    features: Vec<f64>,
    action: usize,
    reward: f64,
    next_features: Vec<f64>,
    next_mask: Vec<bool>,
    done: bool,
}

/// Bellman target `r + gamma * max_a' Q_target(s', a')` over valid `a'`, or
/// `r` at a terminal step.
pub fn td_target(reward: f64, done: bool, gamma: f64, next_q: &[f64], next_mask: &[bool]) -> f64 {
    if done {
        return reward;
    }
    match masked_argmax(next_q, next_mask) {
        Some(i) => reward + gamma * next_q[i],
        None => reward,
    }
}

/// Trains a DQN agent on `cfg` with the same log schema as PPO.
pub fn train_dqn(cfg: &ScenarioConfig, hyper: &DqnHyper, seed: u64) -> Result<TrainOutcome, RlError> {
    if hyper.batch == 0 || hyper.buffer_capacity == 0 || hyper.target_update == 0 || hyper.log_interval == 0 {
        return Err(RlError::Hyper("batch, capacity, target and log intervals must be positive".into()));
    }
    let opts = hyper.env_options(cfg);
    let mut env = OffloadEnv::new(cfg.clone(), opts.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![opts.feature_len()];
    sizes.extend_from_slice(&hyper.hidden);
    sizes.push(opts.flat_action_count());
    let mut online = QPolicy {
        net: Mlp::init(&sizes, 0.01, &mut rng)?,
        n_max: opts.n_max,
        m_max: opts.m_max,
    };
    let mut target = online.net.clone();
    let mut opt = Adam::new(online.net.num_params(), AdamHyper::default());
    let total = hyper.total_steps;

    let greedy = |q: &QPolicy| -> Result<_, RlError> {
        let mut e = OffloadEnv::new(cfg.clone(), opts.clone())?;
        Ok(run_episode(q, &mut e, 0)?)
    };
    let mut log = vec![LogRow::from_episode(0, &greedy(&online)?, None, hyper.lr.at(0, total))];

    let mut replay: Vec<Transition> = Vec::with_capacity(hyper.buffer_capacity.min(1 << 16));
    let mut cursor = 0usize;
    let mut episodes = 0u64;
    let mut state = env.reset(0);
    let mut finished = (0usize, 0usize);
    let mut grads = vec![0.0; online.net.num_params()];
    for t in 1..=total {
        let mask = state.action_mask().flat();
        let features = state.features();
        let action = if rng.gen::<f64>() < hyper.epsilon(t - 1) {
            let valid: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            valid[rng.gen_range(0..valid.len())]
        } else {
            let q = online.net.forward(&features)?;
            masked_argmax(&q, &mask).expect("some action is valid")
        };
        let step = env.step(EnvAction::from_flat(action, opts.m_max))?;
        let tr = Transition {
            features,
            action,
            reward: step.reward * hyper.reward_scale,
            next_features: step.state.features(),
            next_mask: step.state.action_mask().flat(),
            done: step.done,
        };
        if replay.len() < hyper.buffer_capacity {
            replay.push(tr);
        } else {
            replay[cursor] = tr;
            cursor = (cursor + 1) % hyper.buffer_capacity;
        }
        if step.done {
            finished.0 += 1;
            finished.1 += usize::from(step.report.is_feasible());
            episodes += 1;
            state = env.reset(episodes);
        } else {
            state = step.state;
        }

        let lr = hyper.lr.at(t, total);
        if t >= hyper.learning_starts && replay.len() >= hyper.batch {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / hyper.batch as f64;
            for _ in 0..hyper.batch {
                let tr = &replay[rng.gen_range(0..replay.len())];
                let next_q = target.forward(&tr.next_features)?;
                let y = td_target(tr.reward, tr.done, hyper.gamma, &next_q, &tr.next_mask);
                let trace = online.net.forward_trace(&tr.features)?;
                let mut g = vec![0.0; trace.output().len()];
                // Huber loss with unit threshold
                g[tr.action] = (trace.output()[tr.action] - y).clamp(-1.0, 1.0) * scale;
                online.net.backward(&trace, &g, &mut grads)?;
            }
            clip_grad_norm(&mut grads, hyper.max_grad_norm);
            if !grads.iter().all(|g| g.is_finite()) {
                return Err(RlError::NonFinite(format!("q-network gradient at step {t}")));
            }
            opt.step(online.net.params_mut(), &grads, lr);
        }
        if t % hyper.target_update == 0 {
            target = online.net.clone();
        }
        if t % hyper.log_interval == 0 || t == total {
            let frac = (finished.0 > 0).then(|| finished.1 as f64 / finished.0 as f64);
            finished = (0, 0);
            log.push(LogRow::from_episode(t, &greedy(&online)?, frac, lr));
        }
    }
    let last = greedy(&online)?;
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new("dqn", opts.n_max, opts.m_max, vec![("q", online.net)]),
        log,
        schedule: last.schedule,
        report: last.report,
    })
}
