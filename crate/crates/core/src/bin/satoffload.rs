use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use satoffload::baselines::DEFAULT_ORACLE_CAP;
use satoffload::harness::{
    self, Algorithm, HarnessError, LrMode, PolicySpec, SweepAxis, TrainSettings, OUT_ENV,
};

#[derive(Parser)]
#[command(name = "satoffload", version, about = "Task offloading to a LEO constellation: train, evaluate, sweep, oracle")]
struct Cli {
    /// Output directory (overrides $SATOFFLOAD_OUT; default ./satoffload-out)
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a PPO or DQN agent; writes a checkpoint and a training-log CSV
    Train {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = AlgoArg::Ppo)]
        algo: AlgoArg,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate a baseline or a checkpoint over several seeds
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        /// random, uniform, oracle, ppo, dqn, or a path to a .ckpt file
        #[arg(long)]
        policy: String,
        /// Seeds as a list (1,2,3) or an inclusive range (1..5)
        #[arg(long, default_value = "0", value_parser = parse_seeds)]
        seeds: Seeds,
        /// Pool size of the random baseline
        #[arg(long, default_value_t = 1000)]
        pool: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Evaluate policies across values of one scenario parameter
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// tasks, reliability (success %) or privacy (threshold %)
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        policies: Vec<String>,
        #[arg(long, default_value = "0", value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long, default_value_t = 1000)]
        pool: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Enumerate every schedule of a small scenario and export the optimum as JSON
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        /// Refuse search spaces larger than this
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: u128,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Ppo,
    Dqn,
}

#[derive(Clone, Copy, ValueEnum)]
enum LrModeArg {
    Fixed,
    Linear,
}

/// Training hyperparameters shared by `train`, and by `evaluate`/`sweep` when
/// they train a policy per seed.
#[derive(Args, Clone)]
struct TrainArgs {
    /// Total environment steps
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long, value_enum, default_value_t = LrModeArg::Linear)]
    lr_mode: LrModeArg,
    /// Initial (or fixed) learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Final learning rate of the linear schedule
    #[arg(long)]
    lr_final: Option<f64>,
    /// Steps collected per PPO update
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    /// Entropy bonus coefficient
    #[arg(long)]
    entropy: Option<f64>,
    /// Decay the entropy bonus linearly to zero
    #[arg(long)]
    anneal_entropy: bool,
    /// Hidden layer widths, e.g. 64,64
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Terminal penalty per violated constraint
    #[arg(long)]
    penalty: Option<f64>,
}

impl TrainArgs {
    fn settings(&self, algorithm: Algorithm) -> TrainSettings {
        TrainSettings {
            algorithm,
            steps: self.steps,
            lr_mode: match self.lr_mode {
                LrModeArg::Fixed => LrMode::Fixed,
                LrModeArg::Linear => LrMode::Linear,
            },
            lr: self.lr,
            lr_final: self.lr_final,
            horizon: self.horizon,
            epochs: self.epochs,
            minibatch: self.minibatch,
            entropy: self.entropy,
            anneal_entropy: self.anneal_entropy,
            hidden: self.hidden.clone(),
            penalty: self.penalty,
        }
    }
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(s: &str) -> Result<Seeds, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if b < a {
            return Err("empty seed range".into());
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad seed `{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Seeds)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let out = harness::output_root(cli.out.as_deref());
    match cli.command {
        Command::Train {
            scenario,
            seed,
            algo,
            train,
        } => {
            let algorithm = match algo {
                AlgoArg::Ppo => Algorithm::Ppo,
                AlgoArg::Dqn => Algorithm::Dqn,
            };
            let a = harness::cmd_train(&scenario, &train.settings(algorithm), seed, &out)?;
            let r = &a.outcome.report;
            println!("checkpoint: {}", a.checkpoint_path.display());
            println!("log: {}", a.log_path.display());
            println!(
                "final greedy policy: C={} T_total={} E={} r_failure={} P_total={} feasible={}",
                r.cost,
                r.total_time,
                r.energy_total(),
                r.failure_prob,
                r.privacy_total(),
                r.is_feasible()
            );
        }
        Command::Evaluate {
            scenario,
            policy,
            seeds,
            pool,
            train,
        } => {
            let spec = PolicySpec::parse(&policy, pool, &train.settings(Algorithm::Ppo))?;
            let a = harness::cmd_evaluate(&scenario, &spec, &seeds.0, &out)?;
            print!("{}", a.csv);
            eprintln!("wrote {}", a.path.display());
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            policies,
            seeds,
            pool,
            train,
        } => {
            let axis: SweepAxis = axis.parse()?;
            let settings = train.settings(Algorithm::Ppo);
            let specs = policies
                .iter()
                .map(|p| PolicySpec::parse(p, pool, &settings))
                .collect::<Result<Vec<_>, _>>()?;
            let a = harness::cmd_sweep(&scenario, axis, &values, &specs, &seeds.0, &out)?;
            println!("wrote {} rows to {}", a.rows.len(), a.path.display());
        }
        Command::Oracle { scenario, cap } => {
            let a = harness::cmd_oracle(&scenario, cap, &out)?;
            let best = a.result.best();
            println!(
                "enumerated {} schedules; best cost {} (feasible: {})",
                a.result.count,
                best.cost(),
                best.report.is_feasible()
            );
            println!("wrote {}", a.path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
