use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE: &str = r#"{"support": [0, 10], "groups": [[9, 8, 7], [7, 3, 2]]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairauction"))
        .args(args)
        .env_remove("FAIRAUCTION_THREADS")
        .output()
        .expect("spawn fairauction")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn second_price_on_the_example() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", EXAMPLE);
    let v = json(&run(&["run-auction", "--mechanism", "second-price", "--bids-file", &bids]));
    assert_eq!(v["winner"], 0);
    assert_eq!(v["price"], 8.0);
    assert_eq!(v["payments"].as_array().unwrap().len(), 6);
}

#[test]
fn simple_mechanism_frequencies_match_the_lottery() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", EXAMPLE);
    let v = json(&run(&["run-auction", "--mechanism", "simple", "--bids-file", &bids, "--repeat", "100000", "--seed", "3"]));
    let freq = v["group_frequency"][0].as_f64().unwrap();
    assert!((freq - 7.0 / 16.0).abs() < 0.01, "group A frequency {freq}");
    assert_eq!(v["sales"], 100000);
}

#[test]
fn gpm_runs_are_seed_deterministic() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", EXAMPLE);
    let args = ["run-auction", "--mechanism", "gpm", "--epsilon", "0.5", "--bids-file", &bids, "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", EXAMPLE);
    // Missing epsilon for gpm is a configuration error.
    assert_eq!(code(&run(&["run-auction", "--mechanism", "gpm", "--bids-file", &bids])), 2);
    // Malformed bids file.
    let bad = write(dir.path(), "bad.json", r#"{"support": [0, 10], "groups": [[11]]}"#);
    assert_eq!(code(&run(&["run-auction", "--mechanism", "simple", "--bids-file", &bad])), 2);
    // The simple mechanism is not truthful: the top bidder of group B gains by overbidding.
    let ic = run(&[
        "verify-ic", "--mechanism", "simple", "--bids-file", &bids, "--buyers", "3", "--deviation-grid", "6",
        "--trials", "200",
    ]);
    assert_eq!(code(&ic), 4);
    let report: Value = serde_json::from_slice(&ic.stdout).unwrap();
    assert!(report["buyers"][0]["ic_violation"].as_bool().unwrap());
    let sp = run(&["verify-ic", "--mechanism", "second-price", "--bids-file", &bids, "--trials", "50"]);
    assert_eq!(code(&sp), 0);
}

#[test]
fn train_scores_single_group_and_curve_append() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", r#"{"support": [0, 10], "groups": [[4, 7, 1]]}"#);
    let out = dir.path().join("scores.json");
    let curve = dir.path().join("curve.csv");
    for seed in ["1", "2"] {
        let o = run(&[
            "train-scores", "--bids-file", &bids, "--epsilon", "0.5", "--episodes", "3", "--steps", "2",
            "--seed", seed, "--out", out.to_str().unwrap(), "--curve", curve.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let scores: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(scores["base"], "linear");
    let lines: Vec<String> = fs::read_to_string(&curve).unwrap().lines().map(str::to_owned).collect();
    assert_eq!(lines[0], "episode,psi,g,lambda,fair");
    assert_eq!(lines.len(), 1 + 2 * 3, "header written once");
    assert!(lines[1].ends_with(",1"), "one group is always fair");
}

#[test]
fn experiment_grid_cardinality() {
    let dir = TempDir::new().unwrap();
    let grid = write(
        dir.path(),
        "grid.json",
        r#"{"group_sizes": [[3, 5], [4, 4]], "valuations": [["uniform:0:10", "uniform:0:8"]],
            "epsilons": [0.0, 0.5, 1.0, 1.5, 2.0], "mechanisms": ["second_price", "simple", "gpm", "gsm"],
            "trials": 1, "mc_reps": 20,
            "learner": {"learning_rate": 0.05, "dual_learning_rate": 1.0, "episodes": 2, "sgd_steps_per_episode": 1, "hidden_width": 4}}"#,
    );
    let out = dir.path().join("out.csv");
    let o = run(&["experiment", "--grid", &grid, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 5 * 4);
    assert!(lines[0].starts_with("cell_id,mechanism,n1,n2"));
}

#[test]
fn verify_fairness_of_gpm() {
    let dir = TempDir::new().unwrap();
    let bids = write(dir.path(), "bids.json", EXAMPLE);
    let v = json(&run(&[
        "verify-fairness", "--mechanism", "gpm", "--bids-file", &bids, "--epsilon", "1.0", "--reps", "300",
    ]));
    assert!(v["passed"].as_bool().unwrap());
    assert!(v["gap"].as_f64().unwrap() <= 1.0 + 4.0 * v["gap_se"].as_f64().unwrap());
    // Second price ignores groups and fails a tight bound.
    let sp = run(&["verify-fairness", "--mechanism", "second-price", "--bids-file", &bids, "--epsilon", "0.1", "--reps", "10"]);
    assert_eq!(code(&sp), 4);
}

#[test]
fn profile_spec_needs_sizes() {
    let o = run(&["train-scores", "--profile-spec", "uniform:0:10", "--epsilon", "0.5", "--out", "/dev/null"]);
    assert_eq!(code(&o), 2);
}
