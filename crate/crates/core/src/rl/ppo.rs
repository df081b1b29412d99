//! Clipped-surrogate PPO with GAE over the factored action space.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::env::{ActionMask, EnvAction, EnvOptions, EnvState, OffloadEnv};
use crate::nn::{Adam, AdamHyper, Categorical, Checkpoint, Mlp};

use super::gae::compute_gae;
use super::policy::{run_episode, Episode, FactoredActor, LogRow};
use super::schedule::LrSchedule;
use super::{clip_grad_norm, RlError, TrainOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoHyper {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Environment steps collected per update.
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: LrSchedule,
    pub total_steps: u64,
    /// Terminal penalty per violated constraint; the scenario's value when unset.
    pub penalty: Option<f64>,
    pub entropy_coef: f64,
    /// Decay the entropy coefficient linearly to zero over training.
    pub anneal_entropy: bool,
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    /// Multiplier applied to rewards before they reach the learner.
    pub reward_scale: f64,
    /// Pad observations to this many tasks and satellites (scenario size when unset).
    pub n_max: Option<usize>,
    pub m_max: Option<usize>,
    /// Evaluate the full-buffer surrogate after every epoch.
    pub track_surrogate: bool,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            horizon: 2048,
            epochs: 10,
            minibatch: 64,
            lr: LrSchedule::default_decay(),
            total_steps: 1_000_000,
            penalty: None,
            entropy_coef: 0.01,
            anneal_entropy: false,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            reward_scale: 0.01,
            n_max: None,
            m_max: None,
            track_surrogate: false,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |what: &str| Err(RlError::Hyper(what.to_string()));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.horizon == 0 || self.epochs == 0 || self.minibatch == 0 {
            return bad("horizon, epochs and minibatch must be positive");
        }
        Ok(())
    }

    pub fn env_options(&self, cfg: &ScenarioConfig) -> EnvOptions {
        let base = EnvOptions::for_scenario(cfg);
        EnvOptions {
            n_max: self.n_max.unwrap_or(base.n_max),
            m_max: self.m_max.unwrap_or(base.m_max),
            penalty: self.penalty.unwrap_or(base.penalty),
            ..base
        }
    }
}

/// Experience gathered between two updates.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub features: Vec<Vec<f64>>,
    pub masks: Vec<ActionMask>,
    /// `[task, location, redundancy]` head indices.
    pub actions: Vec<[usize; 3]>,
    /// Joint log-probability under the policy that collected the step.
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    pub fn push(&mut self, state: &EnvState, action: [usize; 3], log_prob: f64, reward: f64, value: f64, done: bool) {
        self.features.push(state.features());
        self.masks.push(state.action_mask());
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }

    pub fn finish(&mut self, last_value: f64, gamma: f64, lambda: f64) {
        let (a, r) = compute_gae(&self.rewards, &self.values, &self.dones, last_value, gamma, lambda);
        self.advantages = a;
        self.returns = r;
    }
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub actor: FactoredActor,
    pub critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateStats {
    /// Full-buffer clipped surrogate after each epoch (empty unless tracked).
    pub epoch_surrogates: Vec<f64>,
    pub policy_objective: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

fn joint(heads: &[Categorical; 3], a: [usize; 3]) -> f64 {
    heads.iter().zip(a).map(|(h, i)| h.log_prob(i)).sum()
}

fn clipped(ratio: f64, adv: f64, eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - eps, 1.0 + eps) * adv)
}

impl PpoAgent {
    pub fn new(opts: &EnvOptions, hidden: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let feat = opts.feature_len();
        let heads: usize = opts.head_sizes().iter().sum();
        let mut a_sizes = vec![feat];
        a_sizes.extend_from_slice(hidden);
        let mut c_sizes = a_sizes.clone();
        a_sizes.push(heads);
        c_sizes.push(1);
        let actor = Mlp::init(&a_sizes, 0.01, rng).expect("valid sizes");
        let critic = Mlp::init(&c_sizes, 1.0, rng).expect("valid sizes");
        Self {
            actor_opt: Adam::new(actor.num_params(), AdamHyper::default()),
            critic_opt: Adam::new(critic.num_params(), AdamHyper::default()),
            actor: FactoredActor {
                net: actor,
                n_max: opts.n_max,
                m_max: opts.m_max,
            },
            critic,
        }
    }

    pub fn value(&self, features: &[f64]) -> f64 {
        self.critic.forward(features).expect("feature length matches")[0]
    }

    /// Samples an action; returns it with its joint log-probability.
    pub fn act(&self, state: &EnvState, rng: &mut ChaCha8Rng) -> (EnvAction, [usize; 3], f64) {
        let heads = self.actor.distributions(state);
        let idx = [heads[0].sample(rng), heads[1].sample(rng), heads[2].sample(rng)];
        let action = EnvAction::new(idx[0], idx[1], idx[2] == 1);
        (action, idx, joint(&heads, idx))
    }

    /// Mean clipped surrogate over the buffer under the current actor.
    pub fn surrogate(&self, buf: &RolloutBuffer, adv: &[f64], eps: f64) -> f64 {
        let total: f64 = (0..buf.len())
            .map(|i| {
                let logits = self.actor.net.forward(&buf.features[i]).unwrap();
                let heads = self.actor.heads(&logits, &buf.masks[i]);
                let ratio = (joint(&heads, buf.actions[i]) - buf.log_probs[i]).exp();
                clipped(ratio, adv[i], eps)
            })
            .sum();
        total / buf.len() as f64
    }

    /// F epochs of minibatch ascent on the clipped surrogate plus entropy bonus,
    /// and descent on the squared value error. Clears the buffer.
    pub fn update(
        &mut self,
        buf: &mut RolloutBuffer,
        hyper: &PpoHyper,
        lr: f64,
        entropy_coef: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<UpdateStats, RlError> {
        let n = buf.len();
        let mean = buf.advantages.iter().sum::<f64>() / n as f64;
        let var = buf.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt().max(1e-8);
        let adv: Vec<f64> = buf.advantages.iter().map(|a| (a - mean) / std).collect();

        let [n_task, n_loc, _] = self.actor.head_sizes();
        let eps = hyper.clip;
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats {
            epoch_surrogates: Vec::new(),
            policy_objective: 0.0,
            value_loss: 0.0,
            entropy: 0.0,
            clip_fraction: 0.0,
        };
        let mut ga = vec![0.0; self.actor.net.num_params()];
        let mut gc = vec![0.0; self.critic.num_params()];
        let mut seen = 0usize;
        for _ in 0..hyper.epochs {
            order.shuffle(rng);
            for batch in order.chunks(hyper.minibatch) {
                ga.iter_mut().for_each(|g| *g = 0.0);
                gc.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let trace = self.actor.net.forward_trace(&buf.features[i])?;
                    let heads = self.actor.heads(trace.output(), &buf.masks[i]);
                    let ratio = (joint(&heads, buf.actions[i]) - buf.log_probs[i]).exp();
                    let a = adv[i];
                    let surr = clipped(ratio, a, eps);
                    // d surr / d log pi: ratio * A on the unclipped branch, 0 when clipped
                    let d_logp = if ratio * a <= surr { ratio * a } else { 0.0 };
                    if d_logp == 0.0 && ratio != 1.0 {
                        stats.clip_fraction += 1.0;
                    }
                    let entropy: f64 = heads.iter().map(Categorical::entropy).sum();
                    stats.policy_objective += surr;
                    stats.entropy += entropy;

                    let mut grad_logits = Vec::with_capacity(self.actor.net.output_len());
                    for (h, head) in heads.iter().enumerate() {
                        let gl = head.grad_log_prob(buf.actions[i][h]);
                        let ge = head.grad_entropy();
                        // loss = -(surr + c_H * H)
                        grad_logits.extend(
                            gl.iter()
                                .zip(&ge)
                                .map(|(l, e)| -(d_logp * l + entropy_coef * e) * scale),
                        );
                    }
                    debug_assert_eq!(grad_logits.len(), n_task + n_loc + 2);
                    self.actor.net.backward(&trace, &grad_logits, &mut ga)?;

                    let ct = self.critic.forward_trace(&buf.features[i])?;
                    let err = ct.output()[0] - buf.returns[i];
                    stats.value_loss += err * err;
                    self.critic.backward(&ct, &[2.0 * err * scale], &mut gc)?;
                    seen += 1;
                }
                clip_grad_norm(&mut ga, hyper.max_grad_norm);
                clip_grad_norm(&mut gc, hyper.max_grad_norm);
                if !ga.iter().chain(&gc).all(|g| g.is_finite()) {
                    return Err(RlError::NonFinite(format!(
                        "gradient became non-finite; objective sum {}, value loss sum {}, lr {lr}",
                        stats.policy_objective, stats.value_loss
                    )));
                }
                self.actor_opt.step(self.actor.net.params_mut(), &ga, lr);
                self.critic_opt.step(self.critic.params_mut(), &gc, lr);
            }
            if hyper.track_surrogate {
                stats.epoch_surrogates.push(self.surrogate(buf, &adv, eps));
            }
        }
        if !self.actor.net.is_finite() || !self.critic.is_finite() {
            return Err(RlError::NonFinite(format!(
                "parameters became non-finite; objective sum {}, value loss sum {}",
                stats.policy_objective, stats.value_loss
            )));
        }
        let seen = seen.max(1) as f64;
        stats.policy_objective /= seen;
        stats.value_loss /= seen;
        stats.entropy /= seen;
        stats.clip_fraction /= seen;
        buf.clear();
        Ok(stats)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(
            "ppo",
            self.actor.n_max,
            self.actor.m_max,
            vec![("actor", self.actor.net.clone()), ("critic", self.critic.clone())],
        )
    }
}

/// Collects `steps` transitions, continuing the episode in progress.
fn collect(
    agent: &PpoAgent,
    env: &mut OffloadEnv,
    state: &mut EnvState,
    steps: usize,
    reward_scale: f64,
    episodes: &mut u64,
    finished: &mut (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer, RlError> {
    let mut buf = RolloutBuffer::default();
    for _ in 0..steps {
        let features = state.features();
        let value = agent.value(&features);
        let (action, idx, logp) = agent.act(state, rng);
        let step = env.step(action)?;
        buf.push(state, idx, logp, step.reward * reward_scale, value, step.done);
        if step.done {
            finished.0 += 1;
            finished.1 += usize::from(step.report.is_feasible());
            *episodes += 1;
            *state = env.reset(*episodes);
        } else {
            *state = step.state;
        }
    }
    Ok(buf)
}

fn greedy(agent: &PpoAgent, cfg: &ScenarioConfig, opts: &EnvOptions) -> Result<Episode, RlError> {
    let mut env = OffloadEnv::new(cfg.clone(), opts.clone())?;
    Ok(run_episode(&agent.actor, &mut env, 0)?)
}

/// Trains a PPO agent on `cfg`. Logs a greedy evaluation at step 0 and after
/// every update.
pub fn train_ppo(cfg: &ScenarioConfig, hyper: &PpoHyper, seed: u64) -> Result<TrainOutcome, RlError> {
    hyper.validate()?;
    let opts = hyper.env_options(cfg);
    let mut env = OffloadEnv::new(cfg.clone(), opts.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = PpoAgent::new(&opts, &hyper.hidden, &mut rng);
    let total = hyper.total_steps;

    let mut log = vec![LogRow::from_episode(0, &greedy(&agent, cfg, &opts)?, None, hyper.lr.at(0, total))];
    let mut episodes = 0u64;
    let mut state = env.reset(episodes);
    let mut t = 0u64;
    while t < total {
        let steps = (total - t).min(hyper.horizon as u64) as usize;
        let mut finished = (0usize, 0usize);
        let mut buf = collect(
            &agent,
            &mut env,
            &mut state,
            steps,
            hyper.reward_scale,
            &mut episodes,
            &mut finished,
            &mut rng,
        )?;
        t += steps as u64;
        let last_value = if *buf.dones.last().unwrap() {
            0.0
        } else {
            agent.value(&state.features())
        };
        buf.finish(last_value, hyper.gamma, hyper.lambda);
        let lr = hyper.lr.at(t, total);
        let ent = if hyper.anneal_entropy {
            hyper.entropy_coef * (1.0 - t as f64 / total as f64)
        } else {
            hyper.entropy_coef
        };
        agent.update(&mut buf, hyper, lr, ent, &mut rng)?;
        let frac = (finished.0 > 0).then(|| finished.1 as f64 / finished.0 as f64);
        log.push(LogRow::from_episode(t, &greedy(&agent, cfg, &opts)?, frac, lr));
    }
    let last = greedy(&agent, cfg, &opts)?;
    Ok(TrainOutcome {
        checkpoint: agent.checkpoint(),
        log,
        schedule: last.schedule,
        report: last.report,
    })
}
