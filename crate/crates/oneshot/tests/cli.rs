use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[problem]
n_div = 4

[surrogate]
kind = "legendre"
degree = 1

[rate_n]
max_exp = 5
ref_exp = 6

[rate_lambda]
n_samples = 20
n_lambda = 4

[combined]
max_exp = 4
ref_exp = 5

[sgd]
n_iter = 600
n_checkpoints = 3
n_reference = 16
n_heldout = 10
log_every = 50
surrogates = [{ kind = "legendre", degree = 1 }, { kind = "neural_net", hidden = [3] }]

[mc]
n_samples = 40
"#;

fn oneshot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oneshot")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> String {
    let out = oneshot(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn rate_runs_write_curve_summary_and_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for (cmd, rows) in [("rate-n", 5), ("rate-lambda", 4), ("rate-combined", 4)] {
        let out = tmp.path().join(cmd);
        let stdout = run_ok(&[cmd, "--config", &cfg, "--seed", "3", "--out", out.to_str().unwrap()]);
        assert!(stdout.contains("slope"));

        let curve = std::fs::read_to_string(out.join(format!("{cmd}.csv"))).unwrap();
        let lines: Vec<&str> = curve.lines().collect();
        assert_eq!(lines[0], "abscissa,squared_error_control,squared_error_theta");
        assert_eq!(lines.len(), rows + 1);

        let summary = read_json(&out.join(format!("{cmd}.json")));
        assert_eq!(summary["experiment"], cmd);
        assert_eq!(summary["config"]["seed"], 3);
        assert_eq!(summary["config"]["problem"]["n_div"], 4);
        assert_eq!(summary["config"]["problem"]["misfit_norm"], "euclidean");
        assert!(summary["fit"]["slope"].is_f64());
        assert!(summary["wall_time_s"].as_f64().unwrap() >= 0.0);

        let state = read_json(&out.join(format!("{cmd}_reference_state.json")));
        assert!(state["flattening"].as_str().unwrap().contains("theta["));
        assert_eq!(state["theta"].as_array().unwrap().len(), 45);
        assert_eq!(state["z"].as_array().unwrap().len(), 9);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_ok(&["rate-n", "--config", &cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["rate-n", "--config", &cfg, "--out", b.to_str().unwrap()]);
    run_ok(&["rate-n", "--config", &cfg, "--seed", "1", "--out", c.to_str().unwrap()]);
    let read = |d: &Path| std::fs::read(d.join("rate-n.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn sgd_compare_writes_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("sgd");
    let stdout = run_ok(&["sgd-compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("legendre-1 (45 parameters)"));
    for label in ["legendre-1", "nn-3"] {
        let log = std::fs::read_to_string(out.join(format!("sgd_{label}_log.csv"))).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], "k,beta,lambda,objective,distance");
        assert_eq!(lines.len(), 1 + 13);
        assert!(lines.last().unwrap().starts_with("599,"));
        let cps = std::fs::read_to_string(out.join(format!("sgd_{label}_checkpoints.csv"))).unwrap();
        assert!(cps.starts_with("k,control_error,state_error,residual,target_error"));
        assert_eq!(cps.lines().count(), 1 + 4);
        let state = read_json(&out.join(format!("sgd_{label}_state.json")));
        assert!(state["flattening"].is_string());
    }
    let summary = read_json(&out.join("sgd-compare.json"));
    assert_eq!(summary["surrogates"].as_array().unwrap().len(), 2);
    assert_eq!(summary["z_ref"].as_array().unwrap().len(), 9);
}

#[test]
fn mc_stats_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("mc");
    run_ok(&["mc-stats", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let table = std::fs::read_to_string(out.join("mc-stats.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("x1,x2,mean,std_dev"));
    assert_eq!(table.lines().count(), 1 + 9);
    assert_eq!(read_json(&out.join("mc-stats.json"))["n_samples"], 40);
}

#[test]
fn output_directory_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let target = tmp.path().join("from_config");
    let p = tmp.path().join("c.toml");
    std::fs::write(&p, format!("output = {:?}\n{SMALL}", target.to_str().unwrap())).unwrap();
    run_ok(&["mc-stats", "--config", p.to_str().unwrap()]);
    assert!(target.join("mc-stats.csv").exists());
}

#[test]
fn selftest_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = run_ok(&["selftest", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
    let summary = read_json(&tmp.path().join("selftest.json"));
    assert!(summary["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.toml");
    std::fs::write(&p, "[problem]\nndiv = 4\n").unwrap();
    let out = oneshot(&["rate-n", "--config", p.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.ndiv"));

    let missing = oneshot(&["rate-n", "--config", "/nonexistent/x.toml"]);
    assert!(!missing.status.success());
    assert!(!oneshot(&["frobnicate"]).status.success());

    std::fs::write(&p, "[rate_n]\nmin_exp = 1\nmax_exp = 1\nref_exp = 2\n[problem]\nn_div = 4\n").unwrap();
    let short = oneshot(&["rate-n", "--config", p.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!short.status.success());
    assert!(String::from_utf8_lossy(&short.stderr).contains("at least 4 points"));
}
