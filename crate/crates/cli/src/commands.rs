use serde::Serialize;
use vww_core::data::random_smooth_specs;
use vww_core::estimates::{reports_to_csv, verify, EstimateInput, EstimateReport};
use vww_core::potential::{mollified_primitive, MollifierSpec};
use vww_core::prufer::{build_basis, EigenBasis, PruferOptions};
use vww_core::veryweak::{run_consistency, run_existence, run_uniqueness};
use vww_core::wave::{solve, ForcingTable, SolutionSummary, WaveProblem, WaveSolution};
use vww_core::{GridFunction, TimeGrid};

use crate::config::{BasisConfig, EigsConfig, EstimatesConfig, RunConfig, SolveConfig, VeryWeakConfig};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

#[derive(Debug, Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
}

fn metadata(command: &'static str) -> Metadata {
    Metadata { tool: "vww", version: env!("CARGO_PKG_VERSION"), command }
}

#[derive(Serialize)]
struct Report<'a, R: Serialize> {
    metadata: Metadata,
    #[serde(flatten)]
    body: &'a R,
}

pub fn build(cfg: &BasisConfig) -> CliResult<EigenBasis<f64>> {
    let nu = match cfg.mollifier {
        Some(m) => mollified_primitive(&cfg.nu, &MollifierSpec::new(m.profile, m.epsilon)?, cfg.grid)?,
        None => cfg.nu.clone(),
    };
    Ok(build_basis(&nu, cfg.n_max, cfg.grid, &PruferOptions::default())?)
}

pub fn eigs(cfg: &EigsConfig) -> CliResult<Outputs> {
    let basis = build(&cfg.basis)?;
    let mut out = Outputs::default();
    out.text("eigenvalues.csv", basis.to_csv());
    if cfg.cache {
        out.json("basis.json", &basis.cache(cfg.samples))?;
    }
    Ok(out)
}

struct Solved<'a> {
    problem: WaveProblem<'a, f64>,
    solution: WaveSolution<f64>,
}

fn solve_problem<'a>(
    cfg: &SolveConfig,
    basis: &'a EigenBasis<f64>,
    u0: &GridFunction<f64>,
    u1: &GridFunction<f64>,
) -> CliResult<Solved<'a>> {
    if cfg.time_samples == 0 {
        return Err(CliError::Config("time_samples must be positive".into()));
    }
    let mut problem = WaveProblem::from_data(basis, u0, u1, cfg.horizon)?;
    let times = match &cfg.forcing {
        Some(f) => {
            f.validate()?;
            let tg = TimeGrid::for_spectrum(cfg.horizon, basis.lambda_max())?;
            problem = problem.with_forcing(ForcingTable::from_fn(basis, tg, |t, x| f.eval(t, x))?)?;
            TimeGrid::new(cfg.horizon, cfg.time_samples)?.times()
        }
        None => TimeGrid::new(cfg.horizon, cfg.time_samples)?.times(),
    };
    let solution = solve(&problem, &times)?;
    Ok(Solved { problem, solution })
}

#[derive(Serialize)]
struct EnergyReport {
    basis_id: String,
    forced: bool,
    summary: SolutionSummary<f64>,
}

pub fn solve_cmd(cfg: &SolveConfig, forced: bool) -> CliResult<Outputs> {
    match (forced, cfg.forcing.is_some()) {
        (true, false) => return Err(CliError::Config("forced run needs a 'forcing' block".into())),
        (false, true) => return Err(CliError::Config("'forcing' is only accepted by the forced command".into())),
        _ => {}
    }
    let basis = build(&cfg.basis)?;
    let (u0, u1) = (cfg.u0.sample(basis.grid())?, cfg.u1.sample(basis.grid())?);
    let s = solve_problem(cfg, &basis, &u0, &u1)?;
    let mut out = Outputs::default();
    out.text("solution.csv", s.solution.to_csv());
    let report = EnergyReport { basis_id: basis.id().to_string(), forced, summary: s.solution.summary() };
    out.json("energy.json", &Report { metadata: metadata(if forced { "forced" } else { "solve" }), body: &report })?;
    Ok(out)
}

pub fn estimates(cfg: &EstimatesConfig) -> CliResult<Outputs> {
    if cfg.estimates.is_empty() {
        return Err(CliError::Config("no estimates requested".into()));
    }
    let basis = build(&cfg.problem.basis)?;
    let grid = basis.grid();
    let data = match cfg.battery {
        Some(b) if b.count == 0 => return Err(CliError::Config("battery count must be positive".into())),
        Some(b) => random_smooth_specs(b.seed, b.count),
        None => vec![(cfg.problem.u0.clone(), cfg.problem.u1.clone())],
    };
    let mut reports: Vec<EstimateReport<f64>> = Vec::new();
    for (k, (d0, d1)) in data.iter().enumerate() {
        let (u0, u1) = (d0.sample(grid)?, d1.sample(grid)?);
        let s = solve_problem(&cfg.problem, &basis, &u0, &u1)?;
        let input = EstimateInput {
            problem: &s.problem,
            solution: &s.solution,
            u0: Some(&u0),
            u1: Some(&u1),
            sobolev_order: cfg.sobolev_order,
            label: format!("problem-{k}"),
        };
        for &id in &cfg.estimates {
            reports.push(verify(id, &input)?);
        }
    }
    let mut out = Outputs::default();
    out.json("estimates.json", &reports)?;
    out.text("estimates.csv", reports_to_csv(&reports));
    Ok(out)
}

pub fn veryweak(cfg: &VeryWeakConfig) -> CliResult<Outputs> {
    let e = &cfg.experiment;
    let mut out = Outputs::default();
    let meta = metadata("veryweak");
    match &cfg.run {
        RunConfig::Existence => {
            let r = run_existence(e)?;
            out.json("report.json", &Report { metadata: meta, body: &r })?;
            out.text("report.csv", r.to_csv());
            out.text("report.dat", r.to_dat());
        }
        RunConfig::Uniqueness { perturbation } => {
            let r = run_uniqueness(e, perturbation)?;
            out.json("report.json", &Report { metadata: meta, body: &r })?;
            out.text("report.csv", r.to_csv());
            out.text("report.dat", r.to_dat());
        }
        RunConfig::Consistency { tolerance } => {
            let r = run_consistency(e, *tolerance)?;
            out.json("report.json", &Report { metadata: meta, body: &r })?;
            out.text("report.csv", r.to_csv());
            out.text("report.dat", r.to_dat());
        }
    }
    Ok(out)
}
