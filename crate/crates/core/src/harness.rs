//! Library side of the `satoffload` command-line tool: training, evaluation,
//! parameter sweeps and oracle export, all writing CSV/JSON under one output
//! directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::baselines::{self, BaselineError, Evaluated, DEFAULT_ORACLE_CAP};
use crate::config::{ConfigError, ScenarioConfig};
use crate::metrics::EvaluationReport;
use crate::nn::{Checkpoint, CheckpointError};
use crate::rl::{self, DqnHyper, LrSchedule, PpoHyper, RlError, TrainOutcome, TrainedPolicy};

/// Environment variable that overrides the default output root.
pub const OUT_ENV: &str = "SATOFFLOAD_OUT";
pub const DEFAULT_OUT: &str = "satoffload-out";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario file {0} does not exist")]
    MissingScenario(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        #[source]
        source: CheckpointError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::MissingScenario(_) => 2,
            _ => 1,
        }
    }
}

/// Output root: the explicit value, else `$SATOFFLOAD_OUT`, else `./satoffload-out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    if !path.is_file() {
        return Err(HarnessError::MissingScenario(path.to_path_buf()));
    }
    Ok(ScenarioConfig::load(path)?)
}

fn scenario_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// Provenance lines placed at the top of every CSV.
pub fn provenance(cfg: &ScenarioConfig, seed: &str) -> Vec<String> {
    vec![format!(
        "satoffload {VERSION} scenario_hash={} seed={seed}",
        cfg.scenario_hash()
    )]
}

fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ppo,
    Dqn,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::Dqn => "dqn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LrMode {
    Fixed,
    Linear,
}

/// Training settings gathered from the command line. Unset fields keep the
/// trainer defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub algorithm: Algorithm,
    pub steps: u64,
    pub lr_mode: LrMode,
    pub lr: Option<f64>,
    pub lr_final: Option<f64>,
    pub horizon: Option<usize>,
    pub epochs: Option<usize>,
    pub minibatch: Option<usize>,
    pub entropy: Option<f64>,
    pub anneal_entropy: bool,
    pub hidden: Option<Vec<usize>>,
    pub penalty: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            steps: 1_000_000,
            lr_mode: LrMode::Linear,
            lr: None,
            lr_final: None,
            horizon: None,
            epochs: None,
            minibatch: None,
            entropy: None,
            anneal_entropy: false,
            hidden: None,
            penalty: None,
        }
    }
}

impl TrainSettings {
    pub fn lr_schedule(&self) -> LrSchedule {
        match self.lr_mode {
            LrMode::Fixed => LrSchedule::Fixed {
                lr: self.lr.unwrap_or(LrSchedule::DEFAULT_INITIAL),
            },
            LrMode::Linear => LrSchedule::Linear {
                initial: self.lr.unwrap_or(LrSchedule::DEFAULT_INITIAL),
                final_lr: self.lr_final.unwrap_or(LrSchedule::DEFAULT_FINAL),
            },
        }
    }

    pub fn ppo_hyper(&self) -> PpoHyper {
        let d = PpoHyper::default();
        PpoHyper {
            total_steps: self.steps,
            lr: self.lr_schedule(),
            horizon: self.horizon.unwrap_or(d.horizon),
            epochs: self.epochs.unwrap_or(d.epochs),
            minibatch: self.minibatch.unwrap_or(d.minibatch),
            entropy_coef: self.entropy.unwrap_or(d.entropy_coef),
            anneal_entropy: self.anneal_entropy,
            hidden: self.hidden.clone().unwrap_or(d.hidden),
            penalty: self.penalty,
            ..d
        }
    }

    pub fn dqn_hyper(&self) -> DqnHyper {
        let d = DqnHyper::default();
        DqnHyper {
            total_steps: self.steps,
            lr: self.lr_schedule(),
            batch: self.minibatch.unwrap_or(d.batch),
            hidden: self.hidden.clone().unwrap_or(d.hidden),
            penalty: self.penalty,
            ..d
        }
    }

    pub fn train(&self, cfg: &ScenarioConfig, seed: u64) -> Result<TrainOutcome, HarnessError> {
        Ok(match self.algorithm {
            Algorithm::Ppo => rl::train_ppo(cfg, &self.ppo_hyper(), seed)?,
            Algorithm::Dqn => rl::train_dqn(cfg, &self.dqn_hyper(), seed)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub outcome: TrainOutcome,
}

pub fn cmd_train(
    scenario: &Path,
    settings: &TrainSettings,
    seed: u64,
    out: &Path,
) -> Result<TrainArtifacts, HarnessError> {
    let cfg = load_scenario(scenario)?;
    let outcome = settings.train(&cfg, seed)?;
    let base = format!("{}_{}_seed{seed}", scenario_stem(scenario), settings.algorithm.name());
    let checkpoint_path = out.join(format!("{base}.ckpt"));
    let log_path = out.join(format!("{base}_log.csv"));
    write_file(&checkpoint_path, &outcome.checkpoint.to_bytes())?;
    let mut csv = Vec::new();
    rl::write_log_csv(&mut csv, &provenance(&cfg, &seed.to_string()), &outcome.log).expect("writing to memory");
    write_file(&log_path, &csv)?;
    Ok(TrainArtifacts {
        checkpoint_path,
        log_path,
        outcome,
    })
}

/// A policy that `evaluate` and `sweep` can run.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Random { pool: usize },
    Uniform,
    Oracle { cap: u128 },
    Checkpoint(PathBuf),
    Train(TrainSettings),
}

impl PolicySpec {
    /// Parses `random`, `uniform`, `oracle`, `ppo`, `dqn` or a checkpoint path.
    pub fn parse(name: &str, pool: usize, train: &TrainSettings) -> Result<Self, HarnessError> {
        Ok(match name {
            "random" => PolicySpec::Random { pool },
            "uniform" => PolicySpec::Uniform,
            "oracle" => PolicySpec::Oracle {
                cap: DEFAULT_ORACLE_CAP,
            },
            "ppo" => PolicySpec::Train(TrainSettings {
                algorithm: Algorithm::Ppo,
                ..train.clone()
            }),
            "dqn" => PolicySpec::Train(TrainSettings {
                algorithm: Algorithm::Dqn,
                ..train.clone()
            }),
            path if Path::new(path).extension().is_some_and(|e| e == "ckpt") => {
                PolicySpec::Checkpoint(PathBuf::from(path))
            }
            other => {
                return Err(HarnessError::Invalid(format!(
                    "unknown policy `{other}`; expected random, uniform, oracle, ppo, dqn or a .ckpt file"
                )))
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            PolicySpec::Random { .. } => "random".into(),
            PolicySpec::Uniform => "uniform".into(),
            PolicySpec::Oracle { .. } => "oracle".into(),
            PolicySpec::Checkpoint(p) => p
                .file_stem()
                .map_or_else(|| "checkpoint".into(), |s| s.to_string_lossy().into_owned()),
            PolicySpec::Train(s) => s.algorithm.name().into(),
        }
    }

    /// Runs the policy on `cfg`. `seed` drives the random pool and training;
    /// uniform, oracle and checkpoint policies are deterministic.
    pub fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<Evaluated, HarnessError> {
        Ok(match self {
            PolicySpec::Random { pool } => baselines::random_policy(cfg, *pool, seed)?,
            PolicySpec::Uniform => baselines::uniform_policy(cfg)?,
            PolicySpec::Oracle { cap } => baselines::brute_force_oracle(cfg, *cap)?.best().clone(),
            PolicySpec::Checkpoint(path) => {
                let ck = Checkpoint::load(path).map_err(|source| HarnessError::Checkpoint {
                    path: path.clone(),
                    source,
                })?;
                let policy = TrainedPolicy::from_checkpoint(&ck)?;
                let mut env = policy.env_for(cfg)?;
                let ep = rl::run_episode(&policy, &mut env, seed).map_err(RlError::from)?;
                Evaluated {
                    schedule: ep.schedule,
                    report: ep.report,
                }
            }
            PolicySpec::Train(settings) => {
                let out = settings.train(cfg, seed)?;
                Evaluated {
                    schedule: out.schedule,
                    report: out.report,
                }
            }
        })
    }
}

/// Per-seed metrics as written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub seed: u64,
    pub total_time: f64,
    pub energy: f64,
    pub failure_prob: f64,
    pub privacy: f64,
    pub cost: f64,
    pub feasible: bool,
}

impl MetricRow {
    pub fn new(seed: u64, r: &EvaluationReport) -> Self {
        Self {
            seed,
            total_time: r.total_time,
            energy: r.energy_total(),
            failure_prob: r.failure_prob,
            privacy: r.privacy_total(),
            cost: r.cost,
            feasible: r.is_feasible(),
        }
    }

    fn values(&self) -> [f64; 6] {
        [
            self.total_time,
            self.energy,
            self.failure_prob,
            self.privacy,
            self.cost,
            f64::from(u8::from(self.feasible)),
        ]
    }
}

pub const EVAL_HEADER: &str =
    "seed,T_total,E,r_failure,P_total,C,feasible,T_total_std,E_std,r_failure_std,P_total_std,C_std,feasible_std";

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Evaluation CSV: one row per seed, then a `mean` row whose `_std` columns
/// hold population standard deviations.
pub fn evaluation_csv(comment: &[String], rows: &[MetricRow]) -> String {
    let mut s = comment_block(comment);
    s.push_str(EVAL_HEADER);
    s.push('\n');
    for r in rows {
        let v = r.values();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},,,,,,",
            r.seed,
            v[0],
            v[1],
            v[2],
            v[3],
            v[4],
            u8::from(r.feasible)
        );
    }
    if !rows.is_empty() {
        let cols: Vec<(f64, f64)> = (0..6)
            .map(|k| mean_std(&rows.iter().map(|r| r.values()[k]).collect::<Vec<_>>()))
            .collect();
        let means: Vec<String> = cols.iter().map(|c| c.0.to_string()).collect();
        let stds: Vec<String> = cols.iter().map(|c| c.1.to_string()).collect();
        let _ = writeln!(s, "mean,{},{}", means.join(","), stds.join(","));
    }
    s
}

#[derive(Debug, Clone)]
pub struct EvalArtifacts {
    pub path: PathBuf,
    pub rows: Vec<MetricRow>,
    pub csv: String,
}

pub fn cmd_evaluate(
    scenario: &Path,
    policy: &PolicySpec,
    seeds: &[u64],
    out: &Path,
) -> Result<EvalArtifacts, HarnessError> {
    if seeds.is_empty() {
        return Err(HarnessError::Invalid("at least one seed is required".into()));
    }
    let cfg = load_scenario(scenario)?;
    let rows = seeds
        .par_iter()
        .map(|&seed| policy.run(&cfg, seed).map(|e| MetricRow::new(seed, &e.report)))
        .collect::<Result<Vec<_>, _>>()?;
    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let mut comment = provenance(&cfg, &seed_list.join(" "));
    comment.push(format!("policy={}", policy.label()));
    let csv = evaluation_csv(&comment, &rows);
    let path = out.join(format!("{}_eval_{}.csv", scenario_stem(scenario), policy.label()));
    write_file(&path, csv.as_bytes())?;
    Ok(EvalArtifacts { path, rows, csv })
}

/// Parameter swept by `cmd_sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Number of tasks.
    Tasks,
    /// Required success probability in percent; sets `failure_threshold = 1 - v / 100`.
    Reliability,
    /// Privacy threshold in percent; sets `privacy_threshold = v / 100`.
    Privacy,
}

impl std::str::FromStr for SweepAxis {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tasks" => Ok(SweepAxis::Tasks),
            "reliability" => Ok(SweepAxis::Reliability),
            "privacy" => Ok(SweepAxis::Privacy),
            other => Err(HarnessError::Invalid(format!(
                "unknown sweep axis `{other}`; expected tasks, reliability or privacy"
            ))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Tasks => "tasks",
            SweepAxis::Reliability => "reliability",
            SweepAxis::Privacy => "privacy",
        }
    }

    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, HarnessError> {
        let bad = |why: &str| HarnessError::Invalid(format!("{} value {value}: {why}", self.name()));
        match self {
            SweepAxis::Tasks => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(bad("must be a positive integer"));
                }
                Ok(cfg.modified(|f| f.workload.num_tasks = value as usize)?)
            }
            SweepAxis::Reliability => {
                if !(value > 0.0 && value < 100.0) {
                    return Err(bad("must be a percentage in (0, 100)"));
                }
                Ok(cfg.modified(|f| f.objective.failure_threshold = 1.0 - value / 100.0)?)
            }
            SweepAxis::Privacy => {
                if !(0.0..=200.0).contains(&value) {
                    return Err(bad("must be a percentage in [0, 200]"));
                }
                Ok(cfg.modified(|f| f.objective.privacy_threshold = value / 100.0)?)
            }
        }
    }
}

pub const SWEEP_HEADER: &str = "axis,value,policy,seed,T_total,E,r_failure,P_total,C,feasible";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub policy: String,
    pub metrics: MetricRow,
}

#[derive(Debug, Clone)]
pub struct SweepArtifacts {
    pub path: PathBuf,
    pub rows: Vec<SweepRow>,
    pub csv: String,
}

/// Evaluates every (value, policy, seed) cell and writes one long-format CSV.
/// Cells run in parallel; rows keep the Cartesian order.
pub fn cmd_sweep(
    scenario: &Path,
    axis: SweepAxis,
    values: &[f64],
    policies: &[PolicySpec],
    seeds: &[u64],
    out: &Path,
) -> Result<SweepArtifacts, HarnessError> {
    if values.is_empty() || policies.is_empty() || seeds.is_empty() {
        return Err(HarnessError::Invalid("sweep needs values, policies and seeds".into()));
    }
    let base = load_scenario(scenario)?;
    let configs = values
        .iter()
        .map(|&v| axis.apply(&base, v))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for (vi, _) in values.iter().enumerate() {
        for (pi, _) in policies.iter().enumerate() {
            for &seed in seeds {
                cells.push((vi, pi, seed));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|&(vi, pi, seed)| {
            let e = policies[pi].run(&configs[vi], seed)?;
            Ok(SweepRow {
                value: values[vi],
                policy: policies[pi].label(),
                metrics: MetricRow::new(seed, &e.report),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let seed_list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    let mut csv = comment_block(&provenance(&base, &seed_list.join(" ")));
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for r in &rows {
        let m = &r.metrics;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            axis.name(),
            r.value,
            r.policy,
            m.seed,
            m.total_time,
            m.energy,
            m.failure_prob,
            m.privacy,
            m.cost,
            u8::from(m.feasible)
        );
    }
    let path = out.join(format!("{}_sweep_{}.csv", scenario_stem(scenario), axis.name()));
    write_file(&path, csv.as_bytes())?;
    Ok(SweepArtifacts { path, rows, csv })
}

#[derive(Debug, Clone)]
pub struct OracleArtifacts {
    pub path: PathBuf,
    pub result: baselines::OracleResult,
}

pub fn cmd_oracle(scenario: &Path, cap: u128, out: &Path) -> Result<OracleArtifacts, HarnessError> {
    let cfg = load_scenario(scenario)?;
    let result = baselines::brute_force_oracle(&cfg, cap)?;
    let path = out.join(format!("{}_oracle.json", scenario_stem(scenario)));
    write_file(&path, result.to_json().as_bytes())?;
    Ok(OracleArtifacts { path, result })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_application() {
        let cfg = ScenarioConfig::from_toml_str(crate::config::DEFAULT_SCENARIO).unwrap();
        let c = SweepAxis::Reliability.apply(&cfg, 97.0).unwrap();
        assert!((c.failure_threshold() - 0.03).abs() < 1e-12);
        let c = SweepAxis::Privacy.apply(&cfg, 80.0).unwrap();
        assert_eq!(c.privacy_threshold(), 0.8);
        assert_eq!(SweepAxis::Tasks.apply(&cfg, 15.0).unwrap().num_tasks(), 15);
        assert!(SweepAxis::Tasks.apply(&cfg, 1.5).is_err());
        assert!(SweepAxis::Reliability.apply(&cfg, 100.0).is_err());
        assert!("latency".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn evaluation_csv_has_aggregate_row() {
        let row = |seed, cost| MetricRow {
            seed,
            total_time: 1.0,
            energy: 2.0,
            failure_prob: 0.0,
            privacy: 1.0,
            cost,
            feasible: true,
        };
        let csv = evaluation_csv(&["x".into()], &[row(1, 3.0), row(2, 5.0)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# x");
        assert_eq!(lines[1], EVAL_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[4], "mean,1,2,0,1,4,1,0,0,0,0,1,0");
        assert_eq!(lines[2].split(',').count(), EVAL_HEADER.split(',').count());
    }

    #[test]
    fn output_root_precedence() {
        assert_eq!(output_root(Some(Path::new("/x"))), PathBuf::from("/x"));
    }

    #[test]
    fn policy_names() {
        let t = TrainSettings::default();
        assert_eq!(PolicySpec::parse("uniform", 10, &t).unwrap().label(), "uniform");
        assert_eq!(PolicySpec::parse("runs/a.ckpt", 10, &t).unwrap().label(), "a");
        assert!(PolicySpec::parse("greedy", 10, &t).is_err());
    }

    #[test]
    fn fixed_lr_mode() {
        let s = TrainSettings {
            lr_mode: LrMode::Fixed,
            lr: Some(0.01),
            ..TrainSettings::default()
        };
        assert_eq!(s.ppo_hyper().lr.at(500, 1000), 0.01);
    }
}
