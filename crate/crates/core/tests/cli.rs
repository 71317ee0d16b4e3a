//! End-to-end tests of the `nhthermo` binary: exit codes, flag/config
//! precedence, manifests and deterministic outputs.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn nhthermo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhthermo")).args(args).env_remove("NHTHERMO_THREADS").output().expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run_manifest.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_sites_is_a_usage_error_naming_l() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = nhthermo(&["hn-sweep", "--L", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains('L'), "{}", stderr(&o));
    assert!(!out.exists(), "failed run left its output directory behind");
}

#[test]
fn unknown_flag_and_unknown_config_key_exit_2() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&["hn-sweep", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"L": 50, "temperature": 1}"#).unwrap();
    let o = nhthermo(&["hn-sweep", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("temperature"), "{}", stderr(&o));
}

#[test]
fn malformed_grid_names_its_key() {
    let o = nhthermo(&["hn-critical", "--T-grid", "0.1:oops:3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("T-grid"), "{}", stderr(&o));
}

#[test]
fn invalid_engine_gamma_step_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&["engine-sweep", "--gamma-step", "0", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma-step"));
}

#[test]
fn flags_override_config_values() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"L": 40, "J": 1.0, "T-grid": "10", "g-grid": "0,0.5"}"#).unwrap();
    let out = dir.path().join("run");
    let o = nhthermo(&[
        "hn-sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--T-grid",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["T-grid"], "1");
    assert_eq!(m["config"]["L"], 40);
    let csv = fs::read_to_string(out.join("hn_sweep.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("1.000000000000e+00")), "{csv}");
}

#[test]
fn hn_sweep_is_deterministic_and_reproducible_from_its_manifest() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["hn-sweep", "--L", "60", "--T-grid", "0.5,1", "--g-grid", "0:1:5"];
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let mut v: Vec<&str> = args.to_vec();
        v.extend(["--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(nhthermo(&v).status.code(), Some(0));
    }
    let csv_a = fs::read(a.join("hn_sweep.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("hn_sweep.csv")).unwrap());
    assert_eq!(String::from_utf8_lossy(&csv_a).lines().count(), 1 + 10);

    let cfg = dir.path().join("replay.json");
    fs::write(&cfg, manifest(&a)["config"].to_string()).unwrap();
    let o = nhthermo(&["hn-sweep", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(csv_a, fs::read(c.join("hn_sweep.csv")).unwrap());
}

#[test]
fn threads_fall_back_to_the_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nhthermo"))
        .args(["hn-sweep", "--L", "20", "--T-grid", "1", "--g-grid", "0.5", "--out", dir.path().to_str().unwrap()])
        .env("NHTHERMO_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(manifest(dir.path())["threads"], 2);
}

#[test]
fn steady_state_of_the_two_level_model() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&["steady-state", "--gamma", "0.5", "--T", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("steady_state.json")).unwrap()).unwrap();
    let (i, d) = (s["I_NH"].as_f64().unwrap(), s["relative_entropy_to_gibbs"].as_f64().unwrap());
    assert!(i > 0.0 && (i - d).abs() < 1e-8, "{i} vs {d}");
    let m = manifest(dir.path());
    assert_eq!(m["command"], "steady-state");
    assert_eq!(m["config"]["T"], 2.0);
}

#[test]
fn evolve_writes_trajectory_and_ledger() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&[
        "evolve",
        "--model",
        "random",
        "--dim",
        "3",
        "--seed",
        "7",
        "--kappa",
        "0.1",
        "--t-final",
        "20",
        "--integrator",
        "magnus4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ledger = fs::read_to_string(dir.path().join("ledger.csv")).unwrap();
    assert!(ledger.starts_with("t,U,S,Q_rate,W_rate,Sigma_rate,J_S,I_NH"));
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), ledger.lines().count());
    assert!(manifest(dir.path())["results"]["max_trace_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn short_engine_sweep_has_one_row_per_gamma() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&[
        "engine-sweep",
        "--T",
        "10",
        "--kappa",
        "0.05",
        "--ramp-time-1",
        "400",
        "--ramp-time-3",
        "4000",
        "--hold-time",
        "200",
        "--gamma-min",
        "0",
        "--gamma-max",
        "0.5",
        "--gamma-step",
        "0.25",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("engine_sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("gamma,T,W_total,T_times_INH,closed_form"));
    assert_eq!(lines.count(), 3);
    assert_eq!(manifest(dir.path())["results"]["grid_points"], 3);
}

#[test]
fn help_exits_zero() {
    assert_eq!(nhthermo(&["--help"]).status.code(), Some(0));
    assert_eq!(nhthermo(&["selftest", "--help"]).status.code(), Some(0));
}

#[test]
fn selftest_subset_writes_a_report() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&["selftest", "--only", "ep-kink", "--no-artifacts", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS [ep-kink]"));
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("selftest_report.json")).unwrap()).unwrap();
    assert_eq!(r["all_passed"], true);
    assert_eq!(manifest(dir.path())["results"]["criteria"]["ep-kink"], true);
}

#[test]
fn failing_criterion_exits_1_but_keeps_the_report() {
    let dir = TempDir::new().unwrap();
    let o = nhthermo(&["selftest", "--only", "master-inequality", "--no-artifacts", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("selftest_report.json").exists());
}

#[test]
fn unknown_criterion_exits_2() {
    let o = nhthermo(&["selftest", "--only", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}
