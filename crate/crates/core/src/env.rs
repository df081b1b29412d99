//! Sequential decision environment over the schedule evaluator.
//!
//! One episode assigns every task once. Each step appends a decision to the
//! growing schedule, re-evaluates it and pays `psi - (C_after - C_before)`, so
//! an episode's return telescopes to `N psi - C(schedule) - penalties`. The
//! terminal step also subtracts `penalty * (violated constraints)`.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::constellation::Constellation;
use crate::metrics::EvaluationReport;
use crate::model::{Decision, Location, Schedule};
use crate::timeline::{evaluate_partial, EvalError};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("action {0:?} is masked")]
    MaskedAction(EnvAction),
    #[error("episode is over; call reset")]
    EpisodeDone,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("scenario has {tasks} tasks and {satellites} satellites but the environment pads to {n_max} and {m_max}")]
    Dimensions {
        tasks: usize,
        satellites: usize,
        n_max: usize,
        m_max: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvOptions {
    /// Padded task dimension of observations and actions.
    pub n_max: usize,
    /// Padded satellite dimension of observations and actions.
    pub m_max: usize,
    /// Reward per step before subtracting marginal cost.
    pub reward_constant: f64,
    /// Terminal penalty per violated constraint.
    pub penalty: f64,
    /// Cost charged in place of `+inf` when a partial schedule becomes
    /// infeasible, so rewards stay finite.
    pub infeasible_cost: f64,
}

impl EnvOptions {
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            n_max: cfg.num_tasks(),
            m_max: cfg.num_satellites(),
            reward_constant: cfg.reward_constant(),
            penalty: cfg.terminal_penalty(),
            infeasible_cost: 1.0e4,
        }
    }

    pub fn feature_len(&self) -> usize {
        EnvState::feature_len(self.n_max, self.m_max)
    }

    /// Head sizes of the factored action: task, location, redundancy.
    pub fn head_sizes(&self) -> [usize; 3] {
        [self.n_max, self.m_max + 1, 2]
    }

    pub fn flat_action_count(&self) -> usize {
        self.n_max * (self.m_max + 1) * 2
    }
}

/// `(x_num, x_location, x_redundance)`; location 0 is local, `j + 1` is satellite `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct EnvAction {
    pub task: usize,
    pub location: usize,
    pub redundancy: bool,
}

impl EnvAction {
    pub fn new(task: usize, location: usize, redundancy: bool) -> Self {
        Self {
            task,
            location,
            redundancy,
        }
    }

    /// `((task * (m_max + 1)) + location) * 2 + redundancy`.
    pub fn to_flat(self, m_max: usize) -> usize {
        (self.task * (m_max + 1) + self.location) * 2 + usize::from(self.redundancy)
    }

    pub fn from_flat(index: usize, m_max: usize) -> Self {
        let redundancy = index % 2 == 1;
        let rest = index / 2;
        Self {
            task: rest / (m_max + 1),
            location: rest % (m_max + 1),
            redundancy,
        }
    }

    pub fn decision(self) -> Decision {
        Decision::new(self.task, Location::from_code(self.location), self.redundancy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionMask {
    pub task: Vec<bool>,
    pub location: Vec<bool>,
    pub redundancy: [bool; 2],
}

impl ActionMask {
    pub fn allows(&self, a: &EnvAction) -> bool {
        self.task.get(a.task).copied().unwrap_or(false)
            && self.location.get(a.location).copied().unwrap_or(false)
    }

    /// Mask over the flattened one-dimensional action space.
    pub fn flat(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.task.len() * self.location.len() * 2);
        for &t in &self.task {
            for &l in &self.location {
                for &r in &self.redundancy {
                    out.push(t && l && r);
                }
            }
        }
        out
    }

    pub fn heads(&self) -> [&[bool]; 3] {
        [&self.task, &self.location, &self.redundancy]
    }
}

/// Status code of an unassigned task.
pub const UNASSIGNED: i32 = -1;
/// Status code of a padding slot beyond the scenario's task count.
pub const PADDING: i32 = 0;

fn status_code(location: usize, redundancy: bool) -> i32 {
    1 + 2 * location as i32 + i32::from(redundancy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Per task slot: `-1` unassigned, `0` padding, else `1 + 2 * location + redundancy`.
    pub task_status: Vec<i32>,
    /// Task sizes divided by the largest size; zero for padding.
    pub task_sizes: Vec<f64>,
    /// Uplink-free time divided by the time threshold.
    pub clock: f64,
    /// Per satellite slot: `[sin, cos]` of the angle at the clock, normalized
    /// backlog, visibility flag. Zero for padding.
    pub satellites: Vec<[f64; 4]>,
    pub step: usize,
    pub num_tasks: usize,
    pub num_satellites: usize,
}

impl EnvState {
    pub fn feature_len(n_max: usize, m_max: usize) -> usize {
        4 * n_max + 1 + 4 * m_max
    }

    /// Flat observation vector fed to the networks.
    pub fn features(&self) -> Vec<f64> {
        let n_max = self.task_status.len();
        let m_max = self.satellites.len();
        let mut f = Vec::with_capacity(Self::feature_len(n_max, m_max));
        let loc_scale = (m_max + 1) as f64;
        for (&status, &size) in self.task_status.iter().zip(&self.task_sizes) {
            match status {
                PADDING => f.extend_from_slice(&[0.0, 0.0, 0.0, 0.0]),
                UNASSIGNED => f.extend_from_slice(&[1.0, size, 0.0, 0.0]),
                code => {
                    let c = code - 1;
                    let loc = (c / 2) as f64;
                    f.extend_from_slice(&[0.0, size, (loc + 1.0) / loc_scale, (c % 2) as f64]);
                }
            }
        }
        f.push(self.clock);
        for s in &self.satellites {
            f.extend_from_slice(s);
        }
        f
    }

    pub fn assigned(&self) -> usize {
        self.task_status.iter().filter(|&&s| s > 0).count()
    }

    pub fn action_mask(&self) -> ActionMask {
        let m_max = self.satellites.len();
        ActionMask {
            task: self.task_status.iter().map(|&s| s == UNASSIGNED).collect(),
            location: (0..=m_max).map(|l| l <= self.num_satellites).collect(),
            redundancy: [true, true],
        }
    }

    /// Short digest of the observation, for trajectory logs.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for x in self.features() {
            h.update(x.to_le_bytes());
        }
        h.update((self.step as u64).to_le_bytes());
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    /// `C_after - C_before` for this decision.
    pub cost_delta: f64,
    pub penalty: f64,
    /// Evaluation of the schedule built so far.
    pub report: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct OffloadEnv {
    cfg: ScenarioConfig,
    opts: EnvOptions,
    schedule: Schedule,
    prev_cost: f64,
    state: EnvState,
    seed: u64,
    done: bool,
}

impl OffloadEnv {
    pub fn new(cfg: ScenarioConfig, opts: EnvOptions) -> Result<Self, EnvError> {
        if cfg.num_tasks() > opts.n_max || cfg.num_satellites() > opts.m_max {
            return Err(EnvError::Dimensions {
                tasks: cfg.num_tasks(),
                satellites: cfg.num_satellites(),
                n_max: opts.n_max,
                m_max: opts.m_max,
            });
        }
        let schedule = Schedule::partial(cfg.num_tasks(), Vec::new()).map_err(EvalError::from)?;
        let mut env = Self {
            state: EnvState {
                task_status: Vec::new(),
                task_sizes: Vec::new(),
                clock: 0.0,
                satellites: Vec::new(),
                step: 0,
                num_tasks: cfg.num_tasks(),
                num_satellites: cfg.num_satellites(),
            },
            cfg,
            opts,
            schedule,
            prev_cost: 0.0,
            seed: 0,
            done: false,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn for_scenario(cfg: ScenarioConfig) -> Result<Self, EnvError> {
        let opts = EnvOptions::for_scenario(&cfg);
        Self::new(cfg, opts)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn options(&self) -> &EnvOptions {
        &self.opts
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Starts a new episode. The dynamics are deterministic, so the seed is
    /// only recorded for provenance.
    pub fn reset(&mut self, seed: u64) -> EnvState {
        self.seed = seed;
        self.schedule = Schedule::partial(self.cfg.num_tasks(), Vec::new())
            .expect("empty schedule is valid");
        self.prev_cost = 0.0;
        self.done = false;
        let max_size = self.cfg.max_task_size_mb();
        let n = self.cfg.num_tasks();
        let mut status = vec![PADDING; self.opts.n_max];
        let mut sizes = vec![0.0; self.opts.n_max];
        for i in 0..n {
            status[i] = UNASSIGNED;
            sizes[i] = self.cfg.task_size_mb(i) / max_size;
        }
        self.state = EnvState {
            task_status: status,
            task_sizes: sizes,
            clock: 0.0,
            satellites: Vec::new(),
            step: 0,
            num_tasks: n,
            num_satellites: self.cfg.num_satellites(),
        };
        self.state.satellites = self.satellite_features(0.0, &[]);
        self.state.clone()
    }

    pub fn action_mask(&self) -> ActionMask {
        self.state.action_mask()
    }

    fn satellite_features(&self, clock: f64, busy_until: &[f64]) -> Vec<[f64; 4]> {
        let c = Constellation::new(&self.cfg);
        let scale = self.cfg.time_threshold_s();
        let mut out = vec![[0.0; 4]; self.opts.m_max];
        for (j, slot) in out.iter_mut().enumerate().take(self.cfg.num_satellites()) {
            let angle = c.angle_at(j, clock);
            let backlog = (busy_until.get(j).copied().unwrap_or(0.0) - clock).max(0.0);
            *slot = [
                angle.sin(),
                angle.cos(),
                backlog / scale,
                f64::from(u8::from(c.is_visible_at(j, clock))),
            ];
        }
        out
    }

    fn finite_cost(&self, report: &EvaluationReport) -> f64 {
        if report.cost.is_finite() {
            report.cost
        } else {
            self.opts.infeasible_cost
        }
    }

    pub fn step(&mut self, action: EnvAction) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if !self.state.action_mask().allows(&action) {
            return Err(EnvError::MaskedAction(action));
        }
        self.schedule
            .push(action.decision())
            .map_err(EvalError::from)?;
        let report = evaluate_partial(&self.schedule, &self.cfg)?;
        let cost = self.finite_cost(&report);
        let cost_delta = cost - self.prev_cost;
        self.prev_cost = cost;

        self.done = self.schedule.is_complete();
        let penalty = if self.done {
            self.opts.penalty * report.violations() as f64
        } else {
            0.0
        };
        let reward = self.opts.reward_constant - cost_delta - penalty;

        let mut busy = vec![0.0f64; self.cfg.num_satellites()];
        for t in &report.timeline {
            if let Location::Satellite(j) = t.location {
                busy[j] = busy[j].max(t.comp_end);
            }
        }
        let clock = if report.upload_end.is_finite() {
            report.upload_end
        } else {
            self.state.clock * self.cfg.time_threshold_s()
        };
        self.state.task_status[action.task] = status_code(action.location, action.redundancy);
        self.state.clock = clock / self.cfg.time_threshold_s();
        self.state.satellites = self.satellite_features(clock, &busy);
        self.state.step += 1;

        Ok(Step {
            state: self.state.clone(),
            reward,
            done: self.done,
            cost_delta,
            penalty,
            report,
        })
    }
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub state_hash: String,
    pub action: [usize; 3],
    pub reward: f64,
}

/// Writes line-delimited JSON trajectory records.
pub struct TrajectoryLogger<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLogger<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record(&mut self, state: &EnvState, action: EnvAction, reward: f64) -> std::io::Result<()> {
        let rec = TrajectoryRecord {
            step: state.step,
            state_hash: state.hash(),
            action: [action.task, action.location, usize::from(action.redundancy)],
            reward,
        };
        serde_json::to_writer(&mut self.out, &rec)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DEFAULT_SCENARIO, TINY_SCENARIO};
    use crate::timeline::evaluate_schedule;

    fn tiny_env() -> OffloadEnv {
        OffloadEnv::for_scenario(ScenarioConfig::from_toml_str(TINY_SCENARIO).unwrap()).unwrap()
    }

    #[test]
    fn reset_default_cfg() {
        let cfg = ScenarioConfig::from_toml_str(DEFAULT_SCENARIO).unwrap();
        let mut env = OffloadEnv::for_scenario(cfg.clone()).unwrap();
        let s = env.reset(3);
        assert_eq!(s.satellites.len(), 25);
        let c = Constellation::new(&cfg);
        assert!((c.angle_at(0, 0.0).to_degrees() - 344.0).abs() < 1e-9);
        assert!((c.angle_at(1, 0.0).to_degrees() - 346.0).abs() < 1e-9);
        let a0 = c.angle_at(0, 0.0);
        assert!((s.satellites[0][0] - a0.sin()).abs() < 1e-15);
        assert_eq!(s.clock, 0.0);
        assert_eq!(s.assigned(), 0);
        assert_eq!(env.reset(3), s);

        let n15 = cfg.modified(|f| f.workload.num_tasks = 15).unwrap();
        let env = OffloadEnv::for_scenario(n15).unwrap();
        assert_eq!(
            env.state().task_status.iter().filter(|&&s| s == UNASSIGNED).count(),
            15
        );
    }

    #[test]
    fn mask_tracks_assignments_and_padding() {
        let mut env = tiny_env();
        assert_eq!(env.action_mask().task, vec![true; 3]);
        env.step(EnvAction::new(2, 1, false)).unwrap();
        assert_eq!(env.action_mask().task, vec![true, true, false]);
        assert!(matches!(
            env.step(EnvAction::new(2, 0, false)),
            Err(EnvError::MaskedAction(_))
        ));

        let cfg = ScenarioConfig::from_toml_str(DEFAULT_SCENARIO)
            .unwrap()
            .modified(|f| f.workload.num_tasks = 15)
            .unwrap();
        let opts = EnvOptions {
            n_max: 90,
            m_max: 30,
            ..EnvOptions::for_scenario(&cfg)
        };
        let env = OffloadEnv::new(cfg, opts).unwrap();
        let mask = env.action_mask();
        assert!(mask.task[..15].iter().all(|&m| m));
        assert!(mask.task[15..].iter().all(|&m| !m));
        assert!(mask.location[..=25].iter().all(|&m| m));
        assert!(mask.location[26..].iter().all(|&m| !m));
        let f = env.state().features();
        assert_eq!(f.len(), EnvState::feature_len(90, 30));
        assert!(f[4 * 15..4 * 90].iter().all(|&x| x == 0.0));
        assert!(f[4 * 90 + 1 + 4 * 25..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reward_is_psi_minus_marginal_cost() {
        let cfg = ScenarioConfig::from_toml_str(TINY_SCENARIO)
            .unwrap()
            .modified(|f| f.rl.reward_constant = 10.0)
            .unwrap();
        let mut env = OffloadEnv::for_scenario(cfg).unwrap();
        let step = env.step(EnvAction::new(0, 2, false)).unwrap();
        assert!((step.reward - (10.0 - step.cost_delta)).abs() < 1e-12);
        assert_eq!(step.penalty, 0.0);
        assert!(!step.done);
    }

    #[test]
    fn episode_telescopes_to_total_cost() {
        let mut env = tiny_env();
        let actions = [
            EnvAction::new(1, 2, true),
            EnvAction::new(0, 0, false),
            EnvAction::new(2, 3, false),
        ];
        let mut total = 0.0;
        let mut last = None;
        for (k, a) in actions.iter().enumerate() {
            let s = env.step(*a).unwrap();
            assert_eq!(s.state.assigned(), k + 1);
            total += s.reward;
            last = Some(s);
        }
        let last = last.unwrap();
        assert!(last.done);
        let full = evaluate_schedule(env.schedule(), env.config()).unwrap();
        let want = -full.cost - 100.0 * full.violations() as f64;
        assert!((total - want).abs() < 1e-9, "{total} vs {want}");
        assert!(matches!(env.step(actions[0]), Err(EnvError::EpisodeDone)));
    }

    #[test]
    fn terminal_penalty_counts_violations() {
        // tighten the reliability threshold so only reliability is violated
        let cfg = ScenarioConfig::from_toml_str(TINY_SCENARIO)
            .unwrap()
            .modified(|f| {
                f.objective.failure_threshold = 1e-300;
                f.objective.privacy_threshold = 0.0;
            })
            .unwrap();
        let mut env = OffloadEnv::for_scenario(cfg).unwrap();
        env.step(EnvAction::new(0, 2, true)).unwrap();
        env.step(EnvAction::new(1, 0, false)).unwrap();
        let last = env.step(EnvAction::new(2, 0, false)).unwrap();
        assert!(last.report.feasible_time);
        assert!(last.report.feasible_privacy);
        assert!(!last.report.feasible_reliability);
        assert_eq!(last.penalty, 100.0);
        assert!((last.reward - (0.0 - last.cost_delta - 100.0)).abs() < 1e-12);
    }

    #[test]
    fn flat_action_round_trip() {
        let m_max = 4;
        for idx in 0..3 * (m_max + 1) * 2 {
            let a = EnvAction::from_flat(idx, m_max);
            assert_eq!(a.to_flat(m_max), idx);
        }
        assert_eq!(EnvAction::new(2, 3, true).to_flat(4), (2 * 5 + 3) * 2 + 1);
        let env = tiny_env();
        let flat = env.action_mask().flat();
        assert_eq!(flat.len(), env.options().flat_action_count());
        assert!(flat.iter().all(|&m| m));
    }

    #[test]
    fn replay_reproduces_rewards_and_log() {
        let actions = [
            EnvAction::new(2, 1, true),
            EnvAction::new(0, 3, false),
            EnvAction::new(1, 0, false),
        ];
        let run = || {
            let mut env = tiny_env();
            let mut log = TrajectoryLogger::new(Vec::new());
            let mut rewards = Vec::new();
            for a in actions {
                let before = env.state().clone();
                let s = env.step(a).unwrap();
                log.record(&before, a, s.reward).unwrap();
                rewards.push(s.reward);
            }
            (rewards, log.into_inner())
        };
        let (r1, l1) = run();
        let (r2, l2) = run();
        assert_eq!(r1, r2);
        assert_eq!(l1, l2);
        let text = String::from_utf8(l1).unwrap();
        let recs: Vec<TrajectoryRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].action, [2, 1, 1]);
        assert_eq!(recs[2].reward, r1[2]);
    }
}
