use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use satoffload::harness::{EVAL_HEADER, SWEEP_HEADER};
use satoffload::rl::LOG_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_satoffload"))
}

fn tiny_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/tiny.scenario")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = run(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn data_lines(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn missing_scenario_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["evaluate", "--scenario", "no/such/file.scenario", "--policy", "uniform"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/file.scenario"));
}

#[test]
fn unknown_policy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    let o = run(
        &["evaluate", "--scenario", s.to_str().unwrap(), "--policy", "greedy"],
        dir.path(),
    );
    assert!(!o.status.success());
    assert_ne!(o.status.code(), Some(2));
}

#[test]
fn evaluate_writes_seed_rows_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    let stdout = ok(
        &["evaluate", "--scenario", s.to_str().unwrap(), "--policy", "random", "--pool", "50", "--seeds", "0..4"],
        dir.path(),
    );
    let file = std::fs::read_to_string(dir.path().join("tiny_eval_random.csv")).unwrap();
    assert_eq!(stdout, file);
    assert!(file.starts_with("# satoffload "));
    let lines = data_lines(&file);
    assert_eq!(lines[0], EVAL_HEADER);
    assert_eq!(lines.len(), 1 + 5 + 1);
    for (i, l) in lines[1..6].iter().enumerate() {
        assert!(l.starts_with(&format!("{i},")), "{l}");
    }
    let mean: Vec<&str> = lines[6].split(',').collect();
    assert_eq!(mean[0], "mean");
    let costs: Vec<f64> = lines[1..6]
        .iter()
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    let want = costs.iter().sum::<f64>() / 5.0;
    let got: f64 = mean[5].parse().unwrap();
    assert!((got - want).abs() < 1e-9 * want);
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    let o = bin()
        .args(["evaluate", "--scenario", s.to_str().unwrap(), "--policy", "uniform"])
        .env("SATOFFLOAD_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("tiny_eval_uniform.csv").exists());
}

#[test]
fn sweep_is_long_format_in_cartesian_order() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    ok(
        &[
            "sweep", "--scenario", s.to_str().unwrap(), "--axis", "reliability", "--values", "95,99",
            "--policies", "uniform,random", "--pool", "20", "--seeds", "0..2",
        ],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("tiny_sweep_reliability.csv")).unwrap();
    let lines = data_lines(&csv);
    assert_eq!(lines[0], SWEEP_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    let keys: Vec<(String, String, String)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[0], "reliability");
            (f[1].into(), f[2].into(), f[3].into())
        })
        .collect();
    let mut want = Vec::new();
    for v in ["95", "99"] {
        for p in ["uniform", "random"] {
            for seed in ["0", "1", "2"] {
                want.push((v.to_string(), p.to_string(), seed.to_string()));
            }
        }
    }
    assert_eq!(keys, want);
}

#[test]
fn train_fixed_lr_log_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    ok(
        &[
            "train", "--scenario", s.to_str().unwrap(), "--seed", "3", "--steps", "2048", "--horizon", "512",
            "--lr-mode", "fixed", "--lr", "0.0003",
        ],
        dir.path(),
    );
    let log = std::fs::read_to_string(dir.path().join("tiny_ppo_seed3_log.csv")).unwrap();
    let lines = data_lines(&log);
    assert_eq!(lines[0], LOG_HEADER);
    assert_eq!(lines.len(), 1 + 1 + 4);
    for l in &lines[1..] {
        assert_eq!(l.rsplit(',').next().unwrap(), "0.0003");
    }
    assert!(lines.last().unwrap().starts_with("2048,"));
    assert!(dir.path().join("tiny_ppo_seed3.ckpt").exists());
}

#[test]
fn evaluating_a_checkpoint_is_deterministic_across_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    ok(
        &["train", "--scenario", s.to_str().unwrap(), "--algo", "dqn", "--steps", "1500"],
        dir.path(),
    );
    let ckpt = dir.path().join("tiny_dqn_seed0.ckpt");
    ok(
        &["evaluate", "--scenario", s.to_str().unwrap(), "--policy", ckpt.to_str().unwrap(), "--seeds", "0,1,2"],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("tiny_eval_tiny_dqn_seed0.csv")).unwrap();
    let rows: Vec<String> = data_lines(&csv)[1..4]
        .iter()
        .map(|l| l.split_once(',').unwrap().1.to_string())
        .collect();
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[1], rows[2]);
}

#[test]
fn oracle_matches_frozen_tiny_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let s = tiny_path();
    let stdout = ok(&["oracle", "--scenario", s.to_str().unwrap()], dir.path());
    assert!(stdout.contains("enumerated 3072 schedules"));
    let json = std::fs::read_to_string(dir.path().join("tiny_oracle.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/tiny_oracle.json")).unwrap();
    assert_eq!(v["count"], fixture["count"]);
    assert_eq!(v["best_feasible"]["schedule"], fixture["best_feasible"]["schedule"]);
    let got = v["best_feasible"]["report"]["cost"].as_f64().unwrap();
    let want = fixture["best_feasible"]["report"]["cost"].as_f64().unwrap();
    assert_eq!(got, want);
}

#[test]
fn oracle_refuses_large_spaces() {
    let dir = tempfile::tempdir().unwrap();
    let s = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/medium.scenario");
    let o = run(&["oracle", "--scenario", s.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("10000000"));
}
