use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn vww(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vww"));
    cmd.args(args).env_remove("VWW_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_config(command: &str, config: &Value) -> (Output, TempDir) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    let out = dir.path().join("out");
    let o = vww(&[command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    (o, dir)
}

fn read(dir: &TempDir, name: &str) -> String {
    fs::read_to_string(dir.path().join("out").join(name)).unwrap()
}

fn column(csv: &str, col: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

fn basis(nu: Value, n_max: usize, grid: usize) -> Value {
    json!({ "nu": nu, "n_max": n_max, "grid": grid })
}

fn free() -> Value {
    json!({ "smooth": { "kind": "zero" } })
}

#[test]
fn eigs_free_spectrum() {
    let (o, dir) = run_config("eigs", &json!({ "basis": basis(free(), 5, 1024), "cache": true }));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&dir, "eigenvalues.csv");
    assert!(csv.starts_with("n,lambda_n,residual,tilde_norm"));
    for (n, l) in column(&csv, 1).iter().enumerate() {
        assert!((l - (PI * (n + 1) as f64).powi(2)).abs() <= 1e-8);
    }
    let cache: Value = serde_json::from_str(&read(&dir, "basis.json")).unwrap();
    assert_eq!(cache["eigenvalues"].as_array().unwrap().len(), 5);
}

#[test]
fn eigs_constant_potential_shift() {
    let nu = json!({ "smooth": { "kind": "linear", "params": [5.0] } });
    let (o, dir) = run_config("eigs", &json!({ "basis": basis(nu, 10, 1024) }));
    assert!(o.status.success());
    for (n, l) in column(&read(&dir, "eigenvalues.csv"), 1).iter().enumerate() {
        assert!((l - (PI * (n + 1) as f64).powi(2) - 5.0).abs() <= 1e-7);
    }
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ \"basis\": { \"nu\": ").unwrap();
    let out = dir.path().join("out");
    let o = vww(&["eigs", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_a_config_error() {
    let (o, _d) = run_config("eigs", &json!({ "basis": basis(free(), 5, 64), "verbose": true }));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_names_the_mode() {
    let nu = json!({ "smooth": { "kind": "zero" }, "jumps": [[0.5, -40.0]] });
    let (o, dir) = run_config("eigs", &json!({ "basis": basis(nu, 5, 256) }));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pi*1"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_file_is_io() {
    let dir = TempDir::new().unwrap();
    let o = vww(&["eigs", "--config", "/nonexistent/cfg.json", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn unwritable_output_is_io() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, json!({ "basis": basis(free(), 3, 64) }).to_string()).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = vww(&["eigs", "--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn solve_standing_wave_end_to_end() {
    let cfg = json!({
        "basis": basis(free(), 10, 256),
        "u0": { "kind": "sine", "params": [1.0, 1.0] },
        "horizon": 1.0,
        "time_samples": 4
    });
    let (o, dir) = run_config("solve", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&dir, "solution.csv");
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5 * 257);
    for r in rows.iter().filter(|r| r[0] == 1.0) {
        assert!((r[2] + (PI * r[1]).sin()).abs() < 1e-9);
    }
    let energy: Value = serde_json::from_str(&read(&dir, "energy.json")).unwrap();
    assert!(energy["summary"]["energy_drift"].as_f64().unwrap() < 1e-9);
    assert_eq!(energy["metadata"]["command"], "solve");
}

#[test]
fn forced_single_mode_end_to_end() {
    let cfg = json!({
        "basis": basis(free(), 10, 256),
        "horizon": 1.0,
        "time_samples": 10,
        "forcing": { "space": { "kind": "sine", "params": [1.0, 1.0] }, "time": { "kind": "constant", "params": [1.0] } }
    });
    let (o, dir) = run_config("forced", &cfg);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let energy: Value = serde_json::from_str(&read(&dir, "energy.json")).unwrap();
    let norms = energy["summary"]["l2_norm"].as_array().unwrap();
    for (j, v) in norms.iter().enumerate() {
        let t = j as f64 / 10.0;
        let exact = (1.0 - (PI * t).cos()) / (PI * PI) / 2f64.sqrt();
        assert!((v.as_f64().unwrap() - exact).abs() < 1e-6);
    }
}

#[test]
fn forced_without_forcing_block_fails() {
    let (o, _d) = run_config("forced", &json!({ "basis": basis(free(), 4, 64), "horizon": 1.0 }));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimates_single_mode_and_full_suite() {
    let problem = json!({
        "basis": basis(free(), 10, 256),
        "u0": { "kind": "sine", "params": [1.0, 1.0] },
        "horizon": 1.0,
        "time_samples": 20
    });
    let (o, dir) = run_config("estimates", &json!({ "problem": problem, "estimates": ["est1"] }));
    assert!(o.status.success());
    let reports: Value = serde_json::from_str(&read(&dir, "estimates.json")).unwrap();
    assert!((reports[0]["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let nu = json!({ "smooth": { "kind": "sine", "params": [0.3, 1] } });
    let problem = json!({
        "basis": basis(nu, 12, 256),
        "u0": { "kind": "power_bump", "params": [4.0, 2.0] },
        "u1": { "kind": "parabola", "params": [1.0] },
        "horizon": 1.0,
        "time_samples": 40,
        "forcing": { "space": { "kind": "parabola", "params": [1.0] }, "time": { "kind": "sine", "params": [1.0, 3.0] } }
    });
    let (o, dir) = run_config("estimates", &json!({ "problem": problem }));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Vec<Value> = serde_json::from_str(&read(&dir, "estimates.json")).unwrap();
    assert_eq!(reports.len(), 13);
    assert!(reports.iter().all(|r| r["ratio"].as_f64().is_some_and(f64::is_finite)));
    assert_eq!(read(&dir, "estimates.csv").lines().next(), Some("estimate_id,ratio,problem_hash"));
}

#[test]
fn unknown_estimate_id_fails() {
    let problem = json!({ "basis": basis(free(), 4, 64), "horizon": 1.0 });
    let (o, _d) = run_config("estimates", &json!({ "problem": problem, "estimates": ["est42"] }));
    assert_eq!(o.status.code(), Some(2));
}

fn experiment(ladder: &[f64]) -> Value {
    json!({
        "experiment": {
            "nu": { "smooth": { "kind": "zero" }, "jumps": [[0.5, 1.0]] },
            "u0": { "kind": "parabola", "params": [4.0] },
            "u1": { "kind": "zero" },
            "ladder": ladder,
            "n_max": 8,
            "grid": 256,
            "horizon": 1.0,
            "time_steps": 20
        },
        "run": { "kind": "existence" }
    })
}

#[test]
fn veryweak_rerun_is_byte_identical() {
    let cfg = experiment(&[0.25, 0.125, 0.0625, 0.03125]);
    let (a, da) = run_config("veryweak", &cfg);
    let (b, db) = run_config("veryweak", &cfg);
    assert!(a.status.success() && b.status.success());
    for name in ["report.json", "report.csv", "report.dat"] {
        assert_eq!(read(&da, name), read(&db, name), "{name}");
    }
    let report: Value = serde_json::from_str(&read(&da, "report.json")).unwrap();
    assert_eq!(report["verdict"], "moderate");
    assert!(read(&da, "report.csv").starts_with("epsilon,norm,discrepancy\n"));
    assert!(!Path::new(&da.path().join("out").join(".report.json.tmp")).exists());
}

#[test]
fn short_ladder_is_rejected_with_message() {
    let (o, _d) = run_config("veryweak", &experiment(&[0.25, 0.125, 0.0625]));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 4"));
}

#[test]
fn threads_flag_and_env_are_validated() {
    let o = vww(&["eigs", "--selftest", "--threads", "1"], &[]);
    assert!(o.status.success());
    let o = vww(&["eigs", "--selftest"], &[("VWW_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
    let o = vww(&["eigs", "--selftest"], &[("VWW_THREADS", "1")]);
    assert!(o.status.success());
}

#[test]
fn selftest_covers_every_command() {
    for cmd in ["eigs", "solve", "forced", "estimates", "veryweak"] {
        let o = vww(&[cmd, "--selftest"], &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    }
}
