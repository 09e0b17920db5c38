//! In-process checks with closed-form answers, run by `--selftest`.

use std::f64::consts::PI;

use serde_json::json;

use crate::commands;
use crate::config::{EigsConfig, EstimatesConfig, SolveConfig, VeryWeakConfig};
use crate::error::{CliError, CliResult};
use crate::Command;

type Case = (&'static str, fn() -> CliResult<bool>);

fn from_json<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))
}

fn basis_block(nu: serde_json::Value, n_max: usize, grid: usize) -> serde_json::Value {
    json!({ "nu": nu, "n_max": n_max, "grid": grid })
}

fn free() -> serde_json::Value {
    json!({ "smooth": { "kind": "zero" } })
}

fn csv_column(csv: &str, col: usize) -> Vec<f64> {
    csv.lines().skip(1).filter_map(|l| l.split(',').nth(col)?.parse().ok()).collect()
}

fn free_spectrum() -> CliResult<bool> {
    let cfg: EigsConfig = from_json(json!({ "basis": basis_block(free(), 5, 512) }))?;
    let basis = commands::build(&cfg.basis)?;
    let lambdas = csv_column(&basis.to_csv(), 1);
    Ok(lambdas.len() == 5 && lambdas.iter().enumerate().all(|(i, l)| (l - (PI * (i + 1) as f64).powi(2)).abs() <= 1e-8))
}

fn malformed_config() -> CliResult<bool> {
    Ok(serde_json::from_str::<EigsConfig>("{\"basis\": ").is_err()
        && from_json::<EigsConfig>(json!({ "basis": basis_block(free(), 5, 512), "colour": 1 })).is_err())
}

fn standing_wave() -> CliResult<bool> {
    let cfg: SolveConfig = from_json(json!({
        "basis": basis_block(free(), 8, 256),
        "u0": { "kind": "sine", "params": [1.0, 1.0] },
        "horizon": 1.0,
        "time_samples": 10
    }))?;
    let basis = commands::build(&cfg.basis)?;
    let u0 = cfg.u0.sample(basis.grid())?;
    let p = vww_core::wave::WaveProblem::from_data(&basis, &u0, &u0.scaled(0.0), 1.0)?;
    let s = vww_core::wave::solve(&p, &[0.5, 1.0])?;
    let err = |j: usize, amp: f64| s.values[j].sub(&u0.scaled(amp)).map(|d| d.l2_norm());
    Ok(err(0, 0.0)? < 1e-9 && err(1, -1.0)? < 1e-9 && s.energy_drift().unwrap_or(1.0) < 1e-9)
}

fn missing_forcing() -> CliResult<bool> {
    let cfg: SolveConfig = from_json(json!({ "basis": basis_block(free(), 4, 64), "horizon": 1.0 }))?;
    Ok(matches!(commands::solve_cmd(&cfg, true), Err(CliError::Config(_))))
}

fn parsed(out: &crate::output::Outputs, name: &str) -> CliResult<serde_json::Value> {
    let body = out.get(name).ok_or_else(|| CliError::Config(format!("{name} missing")))?;
    serde_json::from_str(body).map_err(|e| CliError::Config(e.to_string()))
}

fn forced_single_mode() -> CliResult<bool> {
    let cfg: SolveConfig = from_json(json!({
        "basis": basis_block(free(), 10, 256),
        "horizon": 1.0,
        "time_samples": 20,
        "forcing": { "space": { "kind": "sine", "params": [1.0, 1.0] }, "time": { "kind": "constant", "params": [1.0] } }
    }))?;
    let report = parsed(&commands::solve_cmd(&cfg, true)?, "energy.json")?;
    let norms = report["summary"]["l2_norm"].as_array().cloned().unwrap_or_default();
    Ok(norms.len() == 21
        && norms.iter().enumerate().all(|(j, v)| {
            let t = j as f64 / 20.0;
            let exact = (1.0 - (PI * t).cos()) / (PI * PI) / 2f64.sqrt();
            v.as_f64().is_some_and(|v| (v - exact).abs() < 1e-6)
        }))
}

fn est1_equality() -> CliResult<bool> {
    let cfg: EstimatesConfig = from_json(json!({
        "problem": { "basis": basis_block(free(), 10, 256), "u0": { "kind": "sine", "params": [1.0, 1.0] }, "horizon": 1.0, "time_samples": 20 },
        "estimates": ["est1", "est5"],
        "sobolev_order": 0.0
    }))?;
    let reports = parsed(&commands::estimates(&cfg)?, "estimates.json")?;
    let ratio = |i: usize| reports[i]["ratio"].as_f64().unwrap_or(f64::NAN);
    Ok((ratio(0) - 1.0).abs() < 1e-9 && (ratio(0) - ratio(1)).abs() <= 1e-12)
}

fn unknown_estimate() -> CliResult<bool> {
    Ok(from_json::<EstimatesConfig>(json!({
        "problem": { "basis": basis_block(free(), 4, 64), "horizon": 1.0 },
        "estimates": ["est9"]
    }))
    .is_err())
}

fn experiment(nu: serde_json::Value, ladder: &[f64], run: serde_json::Value) -> CliResult<VeryWeakConfig> {
    from_json(json!({
        "experiment": {
            "nu": nu,
            "u0": { "kind": "parabola", "params": [4.0] },
            "u1": { "kind": "zero" },
            "ladder": ladder,
            "n_max": 8,
            "grid": 256,
            "horizon": 1.0,
            "time_steps": 20
        },
        "run": run
    }))
}

fn trivial_net() -> CliResult<bool> {
    let cfg = experiment(free(), &[0.25, 0.125, 0.0625, 0.03125], json!({ "kind": "existence" }))?;
    let r = vww_core::veryweak::run_existence(&cfg.experiment)?;
    Ok(r.solution_fit.exponent.abs() < 1e-9)
}

fn zero_perturbation() -> CliResult<bool> {
    let cfg = experiment(free(), &[0.25, 0.125, 0.0625, 0.03125], json!({ "kind": "uniqueness", "perturbation": { "order": 2 } }))?;
    let crate::config::RunConfig::Uniqueness { perturbation } = &cfg.run else { return Ok(false) };
    let r = vww_core::veryweak::run_uniqueness(&cfg.experiment, perturbation)?;
    Ok(r.identically_zero)
}

fn short_ladder() -> CliResult<bool> {
    let cfg = experiment(free(), &[0.25, 0.125, 0.0625], json!({ "kind": "existence" }))?;
    Ok(matches!(commands::veryweak(&cfg), Err(e) if e.exit_code() == 2))
}

fn cases(cmd: Command) -> &'static [Case] {
    match cmd {
        Command::Eigs => &[("free spectrum", free_spectrum), ("malformed config", malformed_config)],
        Command::Solve => &[("standing wave", standing_wave)],
        Command::Forced => &[("single forced mode", forced_single_mode), ("missing forcing", missing_forcing)],
        Command::Estimates => &[("est1 equality", est1_equality), ("unknown estimate id", unknown_estimate)],
        Command::Veryweak => &[
            ("trivial net", trivial_net),
            ("zero perturbation", zero_perturbation),
            ("short ladder", short_ladder),
        ],
    }
}

pub fn run(cmd: Command) -> CliResult<()> {
    let mut failed = 0;
    for (name, case) in cases(cmd) {
        let ok = matches!(case(), Ok(true));
        println!("selftest {name}: {}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        return Err(CliError::Selftest(failed));
    }
    Ok(())
}
