//! Non-learning reference policies: random pool, uniform round-robin and the
//! exhaustive oracle.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::ScenarioConfig;
use crate::constellation::Constellation;
use crate::metrics::EvaluationReport;
use crate::model::{schedule_space_size, Decision, Location, Schedule};
use crate::timeline::{evaluate_schedule, EvalError};

pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("pool size must be at least 1")]
    EmptyPool,
    #[error("search space has {count} schedules, above the cap of {cap}")]
    TooLarge { count: String, cap: u128 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluated {
    pub schedule: Schedule,
    pub report: EvaluationReport,
}

impl Evaluated {
    pub fn new(schedule: Schedule, cfg: &ScenarioConfig) -> Result<Self, EvalError> {
        let report = evaluate_schedule(&schedule, cfg)?;
        Ok(Self { schedule, report })
    }

    pub fn cost(&self) -> f64 {
        self.report.cost
    }
}

fn better(a: &EvaluationReport, b: &EvaluationReport) -> bool {
    let (fa, ca) = a.rank_key();
    let (fb, cb) = b.rank_key();
    (fa, ca.total_cmp(&cb)) < (fb, Ordering::Equal)
}

/// Uniformly random complete schedule: random order, location drawn from
/// `0..=M`, fair-coin redundancy.
pub fn random_schedule<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Schedule {
    let n = cfg.num_tasks();
    let m = cfg.num_satellites();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let decisions = order
        .into_iter()
        .map(|task| {
            let loc = Location::from_code(rng.gen_range(0..=m));
            Decision::new(task, loc, rng.gen_bool(0.5))
        })
        .collect();
    Schedule::complete(n, decisions).expect("a permutation covers every task")
}

/// Best of `k` random schedules: cheapest feasible one, or the cheapest
/// overall if none is feasible. Pools for the same seed are nested.
pub fn random_policy(cfg: &ScenarioConfig, k: usize, seed: u64) -> Result<Evaluated, BaselineError> {
    if k == 0 {
        return Err(BaselineError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Evaluated> = None;
    for _ in 0..k {
        let cand = Evaluated::new(random_schedule(cfg, &mut rng), cfg)?;
        if best.as_ref().is_none_or(|b| better(&cand.report, &b.report)) {
            best = Some(cand);
        }
    }
    Ok(best.unwrap())
}

/// Round-robin over the satellites visible at t = 0, taken in counterclockwise
/// (decreasing index) order; tasks in id order, no redundancy. Falls back to
/// all-local when nothing is visible.
pub fn uniform_schedule(cfg: &ScenarioConfig) -> Schedule {
    let n = cfg.num_tasks();
    let mut visible = Constellation::new(cfg).visible_at(0.0);
    if visible.is_empty() {
        return Schedule::all_local(n);
    }
    visible.reverse();
    let decisions = (0..n)
        .map(|i| Decision::new(i, Location::Satellite(visible[i % visible.len()]), false))
        .collect();
    Schedule::complete(n, decisions).expect("tasks in id order")
}

pub fn uniform_policy(cfg: &ScenarioConfig) -> Result<Evaluated, BaselineError> {
    Ok(Evaluated::new(uniform_schedule(cfg), cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    /// Number of schedules enumerated.
    pub count: u64,
    /// Cheapest feasible schedule, if any.
    pub best_feasible: Option<Evaluated>,
    /// Cheapest schedule ignoring the constraints.
    pub best_unconstrained: Evaluated,
}

impl OracleResult {
    /// The feasible optimum, or the unconstrained one when nothing is feasible.
    pub fn best(&self) -> &Evaluated {
        self.best_feasible.as_ref().unwrap_or(&self.best_unconstrained)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle result serializes")
    }
}

/// Decodes candidate `index` into an ordered schedule. The high part picks the
/// permutation (Lehmer code), the low part the per-slot `(location, redundancy)`
/// digits.
pub fn decode_candidate(index: u64, n: usize, m: usize) -> Vec<Decision> {
    let per = 2 * (m as u64 + 1);
    let assignments = per.pow(n as u32);
    let mut perm_code = index / assignments;
    let mut digits = index % assignments;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut fact: u64 = (1..n as u64).product();
    let mut out = Vec::with_capacity(n);
    for slot in 0..n {
        let pick = if slot + 1 < n {
            let p = (perm_code / fact) as usize;
            perm_code %= fact;
            fact /= (n - slot - 1).max(1) as u64;
            p
        } else {
            0
        };
        let task = pool.remove(pick);
        let place = per.pow((n - slot - 1) as u32);
        let d = digits / place;
        digits %= place;
        out.push(Decision::new(
            task,
            Location::from_code((d / 2) as usize),
            d % 2 == 1,
        ));
    }
    out
}

#[derive(Clone)]
struct Best {
    cost: f64,
    decisions: Vec<Decision>,
}

fn pick(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(a), Some(b)) => {
            let ord = a.cost.total_cmp(&b.cost).then_with(|| a.decisions.cmp(&b.decisions));
            Some(if ord == Ordering::Greater { b } else { a })
        }
        (a, None) => a,
        (None, b) => b,
    }
}

/// Exhaustive search over every ordered schedule. Ties resolve to the
/// lexicographically smallest decision sequence.
pub fn brute_force_oracle(cfg: &ScenarioConfig, cap: u128) -> Result<OracleResult, BaselineError> {
    let n = cfg.num_tasks();
    let m = cfg.num_satellites();
    let count = schedule_space_size(n, m).filter(|&c| c <= cap).ok_or_else(|| {
        BaselineError::TooLarge {
            count: schedule_space_size(n, m).map_or_else(|| "more than 2^128".to_string(), |c| c.to_string()),
            cap,
        }
    })? as u64;

    let (feasible, unconstrained) = (0..count)
        .into_par_iter()
        .map(|idx| {
            let decisions = decode_candidate(idx, n, m);
            let schedule = Schedule::complete(n, decisions.clone()).expect("decoded schedules are complete");
            let report = evaluate_schedule(&schedule, cfg).expect("decoded schedules are valid");
            let entry = Best {
                cost: report.cost,
                decisions,
            };
            let feasible = report.is_feasible().then(|| entry.clone());
            (feasible, Some(entry))
        })
        .reduce(
            || (None, None),
            |(fa, ua), (fb, ub)| (pick(fa, fb), pick(ua, ub)),
        );

    let materialize = |b: Best| Evaluated::new(Schedule::complete(n, b.decisions).unwrap(), cfg);
    Ok(OracleResult {
        count,
        best_feasible: feasible.map(materialize).transpose()?,
        best_unconstrained: materialize(unconstrained.expect("at least one candidate"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DEFAULT_SCENARIO, TINY_SCENARIO};
    use std::collections::HashSet;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig::from_toml_str(TINY_SCENARIO).unwrap()
    }

    fn sized(n: usize, m: usize) -> ScenarioConfig {
        tiny()
            .modified(|f| {
                f.workload.num_tasks = n;
                f.orbit.num_satellites = m;
            })
            .unwrap()
    }

    #[test]
    fn decoding_covers_space_without_repeats() {
        for (n, m) in [(1, 1), (2, 1), (2, 2), (3, 1)] {
            let total = schedule_space_size(n, m).unwrap() as u64;
            let all: HashSet<Vec<Decision>> = (0..total).map(|i| decode_candidate(i, n, m)).collect();
            assert_eq!(all.len() as u64, total);
        }
    }

    #[test]
    fn oracle_counts() {
        assert_eq!(brute_force_oracle(&sized(1, 1), DEFAULT_ORACLE_CAP).unwrap().count, 4);
        assert_eq!(brute_force_oracle(&sized(2, 1), DEFAULT_ORACLE_CAP).unwrap().count, 32);
        let err = brute_force_oracle(&sized(3, 3), 100).unwrap_err();
        assert!(err.to_string().contains("3072"));
    }

    #[test]
    fn oracle_dominates_baselines() {
        let cfg = sized(2, 2);
        let o = brute_force_oracle(&cfg, DEFAULT_ORACLE_CAP).unwrap();
        let best = o.best();
        let u = uniform_policy(&cfg).unwrap();
        if u.report.is_feasible() {
            assert!(best.cost() <= u.cost());
        }
        let r = random_policy(&cfg, 50, 1).unwrap();
        if r.report.is_feasible() {
            assert!(best.cost() <= r.cost());
        }
        assert!(o.best_unconstrained.cost() <= best.cost());
    }

    #[test]
    fn random_pool_properties() {
        let cfg = tiny();
        let one = random_policy(&cfg, 1, 42).unwrap();
        let direct = {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            Evaluated::new(random_schedule(&cfg, &mut rng), &cfg).unwrap()
        };
        assert_eq!(one, direct);
        let mut prev = f64::INFINITY;
        let mut prev_feasible = false;
        for k in [1, 2, 5, 20, 100] {
            let r = random_policy(&cfg, k, 42).unwrap();
            if r.report.is_feasible() == prev_feasible {
                assert!(r.cost() <= prev);
            } else {
                assert!(r.report.is_feasible());
            }
            prev = r.cost();
            prev_feasible = r.report.is_feasible();
        }
        assert!(matches!(random_policy(&cfg, 0, 1), Err(BaselineError::EmptyPool)));
    }

    #[test]
    fn uniform_round_robin() {
        let cfg = tiny();
        let s = uniform_schedule(&cfg);
        let locs: Vec<Location> = s.decisions().iter().map(|d| d.location).collect();
        assert_eq!(
            locs,
            vec![Location::Satellite(2), Location::Satellite(1), Location::Satellite(0)]
        );
        assert!(s.decisions().iter().all(|d| !d.redundancy));
        assert_eq!(uniform_schedule(&cfg), s);

        let cfg = ScenarioConfig::from_toml_str(DEFAULT_SCENARIO).unwrap();
        let s = uniform_schedule(&cfg);
        let first = s.decisions()[0].location.satellite().unwrap();
        assert!(Constellation::new(&cfg).is_visible_at(first, 0.0));
        assert!(first > s.decisions()[1].location.satellite().unwrap());
    }

    #[test]
    fn uniform_falls_back_to_local() {
        let cfg = tiny().modified(|f| f.orbit.anchor_deg = 180.0).unwrap();
        assert_eq!(uniform_schedule(&cfg), Schedule::all_local(3));
    }
}
