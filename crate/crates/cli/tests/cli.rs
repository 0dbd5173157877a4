use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &[&str] = &[
    "--iterations", "3", "--population", "20",
    "--set", "samples=60", "--set", "test_samples=10", "--set", "eval_samples=5",
];

fn nesvae(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nesvae"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NESVAE_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_train_retrain_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&nesvae(&["gen", "--out", "data.bin", "--samples", "70", "--seed", "3"], d));
    for run in ["a", "b"] {
        let mut args = vec!["train", "--dataset", "data.bin", "--out-dir", run];
        args.extend_from_slice(SMALL);
        ok(&nesvae(&args, d));
    }
    for f in ["trace.csv", "checkpoint.json", "config.json", "metrics.json", "manifest.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let trace = fs::read_to_string(d.join("a/trace.csv")).unwrap();
    assert!(trace.starts_with("iter,mean_fitness,grad_sq_norm,wallclock_ms,eta\n"));
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn rerun_from_config_reproduces_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["train", "--out-dir", "first"];
    args.extend_from_slice(SMALL);
    ok(&nesvae(&args, d));
    let out = nesvae(&["--threads", "1", "train", "--config", "first/config.json", "--out-dir", "again", "--check-manifest", "first/manifest.json"], d);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("manifest reproduced"));

    let mut m = json(&d.join("first/manifest.json"));
    m["files"]["trace.csv"] = Value::from("0".repeat(64));
    fs::write(d.join("tampered.json"), m.to_string()).unwrap();
    let out = nesvae(&["train", "--config", "first/config.json", "--out-dir", "third", "--check-manifest", "tampered.json"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error[manifest_mismatch]:") && err.contains("trace.csv"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn theorem_check_refuses_adam_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut args = vec!["train", "--out-dir", "run", "--optimizer", "adam"];
    args.extend_from_slice(SMALL);
    ok(&nesvae(&args, d));
    let out = nesvae(&["diagnose", "--run", "run", "--check", "theorem"], d);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.starts_with("error[theory_mismatch]:") && err.contains("Adam"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn theorem_check_accepts_bounded_sgd_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = nesvae(
        &[
            "train", "--task", "toy", "--family", "categorical", "--size", "4", "--optimizer", "sgd", "--eta", "0.001",
            "--loss-bound", "9", "--iterations", "10", "--set", "standardize=false", "--set", "samples=100", "--out-dir", "run",
        ],
        d,
    );
    ok(&out);
    let out = nesvae(&["diagnose", "--run", "run", "--check", "theorem", "--delta", "0.5"], d);
    ok(&out);
    let report = json(&d.join("run/diagnose-theorem.json"));
    assert_eq!(report["report"]["status"], "satisfied");
    assert!(report["step_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn unbiased_training_improves_toy_elbo() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = nesvae(
        &["train", "--task", "toy", "--family", "categorical", "--method", "unbiased", "--iterations", "100", "--out-dir", "run"],
        d,
    );
    ok(&out);
    let m = json(&d.join("run/metrics.json"));
    assert_eq!(m["neg_elbo_kind"], "exact");
    assert!(m["final_neg_elbo"].as_f64().unwrap() <= m["initial_neg_elbo"].as_f64().unwrap(), "{m}");
    assert!(m["edge_f1"].is_null());
    assert!(String::from_utf8_lossy(&out.stdout).contains("neg_elbo="));
}

#[test]
fn tree_training_reports_edge_f1() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--out-dir", "run"];
    args.extend_from_slice(SMALL);
    let out = nesvae(&args, dir.path());
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("edge_f1=") && stdout.contains("random_tree_f1="), "{stdout}");
    let cfg = json(&dir.path().join("run/config.json"));
    assert_eq!(cfg["sigma"], 0.01);
    assert_eq!(cfg["population"], 20);
    assert_eq!(cfg["method"], "nes");
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["train", "--population", "7"],
        vec!["train", "--set", "no_such_key=1"],
        vec!["train", "--method", "simulated_annealing"],
        vec!["train", "--task", "tree", "--family", "categorical"],
        vec!["train", "--config", "missing.json"],
    ] {
        let out = nesvae(&args, d);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error[config]:"), "{args:?}");
    }
    fs::write(d.join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(nesvae(&["train", "--config", "bad.json"], d).status.code(), Some(2));
    assert_eq!(nesvae(&["train", "--no-such-flag"], d).status.code(), Some(2));
}

#[test]
fn module_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = nesvae(&["train", "--dataset", "missing.bin"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.bin"));
    fs::write(d.join("junk.bin"), b"not a dataset").unwrap();
    let out = nesvae(&["train", "--dataset", "junk.bin"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error[corrupt_file]:"), "{}", stderr(&out));
}

#[test]
fn output_root_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--seed", "5"];
    args.extend_from_slice(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_nesvae"))
        .args(&args)
        .current_dir(dir.path())
        .env("NESVAE_OUT", dir.path().join("root"))
        .output()
        .unwrap();
    ok(&out);
    assert!(dir.path().join("root/tree-nes-seed5/manifest.json").exists());
}

#[test]
fn bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = nesvae(&["bench", "--tasks", "nes,reinforce_sampled", "--sizes", "4", "--iterations", "2", "--population", "20", "--out", "b.csv"], dir.path());
    ok(&out);
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,input_size,seed,mean_iter_ms,std_iter_ms");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("nes,4,0,"));
    assert_eq!(nesvae(&["bench", "--tasks", "annealing"], dir.path()).status.code(), Some(2));
}
