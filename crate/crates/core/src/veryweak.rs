//! Regularised problem nets for singular potentials: moderateness of the
//! solution net, propagation of negligible perturbations, and convergence to
//! the classical solution when the potential is bounded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataSpec;
use crate::error::{Error, Result};
use crate::estimates::{verify, EstimateId, EstimateInput};
use crate::fit::log_log_slope;
use crate::grid::{Grid, GridFunction, TimeGrid};
use crate::potential::{
    check_negligibility, fit_moderateness, mollified_primitive, mollify_grid_function, mollify_potential,
    ExponentFit, MollifierProfile, MollifierSpec, NegligibilityCheck, NormKind, NuPrimitive, RegularizedNet,
    SmoothPart, EXPONENT_TOLERANCE,
};
use crate::prufer::{build_basis, EigenBasis, PruferOptions};
use crate::real::{lit, to_f64, Real};
use crate::wave::{analyze_forcing, solve, WaveProblem, WaveSolution};

/// How the initial data depend on `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataNet {
    /// The same data at every scale.
    #[default]
    Fixed,
    /// `eps^-order` times the data.
    Scaled { order: f64 },
    /// Data convolved with the mollifier at the same scale.
    Mollified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct VeryWeakExperiment<T> {
    pub nu: NuPrimitive<T>,
    pub u0: DataSpec,
    pub u1: DataSpec,
    #[serde(default)]
    pub data_net: DataNet,
    pub ladder: Vec<T>,
    #[serde(default)]
    pub profile: MollifierProfile,
    pub n_max: usize,
    pub grid: Grid,
    pub horizon: T,
    pub time_steps: usize,
    /// Growth order the solution net is declared moderate at.
    #[serde(default)]
    pub declared_order: T,
}

impl<T: Real> VeryWeakExperiment<T> {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 4 {
            return Err(Error::LadderTooShort { len: self.ladder.len() });
        }
        if self.ladder.iter().any(|&e| !(e > T::zero() && e <= T::one())) || self.ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("epsilon ladder must lie in (0, 1] and strictly decrease".into()));
        }
        for &e in &self.ladder {
            MollifierSpec::new(self.profile, e)?.check_resolved(self.grid)?;
        }
        if self.n_max == 0 || self.time_steps == 0 || !(self.horizon > T::zero()) {
            return Err(Error::InvalidInput("n_max, time_steps and horizon must be positive".into()));
        }
        self.u0.validate()?;
        self.u1.validate()
    }

    pub fn times(&self) -> Result<Vec<T>> {
        Ok(TimeGrid::new(self.horizon, self.time_steps)?.times())
    }

    fn data_at(&self, eps: T) -> Result<(GridFunction<T>, GridFunction<T>)> {
        let (u0, u1) = (self.u0.sample(self.grid)?, self.u1.sample(self.grid)?);
        Ok(match self.data_net {
            DataNet::Fixed => (u0, u1),
            DataNet::Scaled { order } => {
                let s = eps.powf(lit(-order));
                (u0.scaled(s), u1.scaled(s))
            }
            DataNet::Mollified => {
                let m = MollifierSpec::new(self.profile, eps)?;
                (mollify_grid_function(&u0, &m)?, mollify_grid_function(&u1, &m)?)
            }
        })
    }

    fn regularised(&self, profile: MollifierProfile, eps: T) -> Result<NuPrimitive<T>> {
        mollified_primitive(&self.nu, &MollifierSpec::new(profile, eps)?, self.grid)
    }

    fn basis(&self, nu: &NuPrimitive<T>) -> Result<EigenBasis<T>> {
        build_basis(nu, self.n_max, self.grid, &PruferOptions::default())
    }
}

fn solve_data<T: Real>(
    basis: &EigenBasis<T>,
    u0: &GridFunction<T>,
    u1: &GridFunction<T>,
    horizon: T,
    times: &[T],
) -> Result<WaveSolution<T>> {
    solve(&WaveProblem::from_data(basis, u0, u1, horizon)?, times)
}

/// Evaluates `f(eps)` for every ladder entry in parallel, tagging failures.
fn per_epsilon<T: Real, R: Send>(ladder: &[T], f: impl Fn(T) -> Result<R> + Sync) -> Result<Vec<R>> {
    ladder
        .par_iter()
        .map(|&eps| f(eps).map_err(|e| Error::at_epsilon(to_f64(eps), e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Moderate,
    NotModerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetReport<T> {
    pub ladder: Vec<T>,
    /// `sup_t ||u_eps(t)||_{L2}`.
    pub solution_norms: Vec<T>,
    /// `sup_t ||d_t u_eps(t)||_{L2}`.
    pub velocity_norms: Vec<T>,
    /// `||q_eps||_{Linf}`.
    pub potential_norms: Vec<T>,
    pub solution_fit: ExponentFit<T>,
    pub velocity_fit: ExponentFit<T>,
    /// Absent when the regularised potentials vanish.
    pub potential_fit: Option<ExponentFit<T>>,
    pub declared_order: T,
    pub verdict: Verdict,
}

impl<T: Real> NetReport<T> {
    /// Rows `epsilon,norm,discrepancy`; `norm` is the solution norm and
    /// `discrepancy` its deviation from the fitted power law.
    pub fn to_csv(&self) -> String {
        let fit = log_log_slope(&inv(&self.ladder), &self.solution_norms);
        let mut out = String::from("epsilon,norm,discrepancy\n");
        for (&e, &n) in self.ladder.iter().zip(&self.solution_norms) {
            let d = fit.as_ref().map_or(T::zero(), |f| n.ln() - f.intercept - f.slope * (T::one() / e).ln());
            out.push_str(&format!("{:e},{:e},{:e}\n", e, n, d));
        }
        out
    }

    /// Whitespace columns for log-log plots.
    pub fn to_dat(&self) -> String {
        let mut out = String::from("# epsilon u_norm ut_norm q_linf\n");
        for i in 0..self.ladder.len() {
            out.push_str(&format!(
                "{:e} {:e} {:e} {:e}\n",
                self.ladder[i], self.solution_norms[i], self.velocity_norms[i], self.potential_norms[i]
            ));
        }
        out
    }
}

fn inv<T: Real>(ladder: &[T]) -> Vec<T> {
    ladder.iter().map(|&e| T::one() / e).collect()
}

fn positive_fit<T: Real>(ladder: &[T], norms: &[T], kind: NormKind) -> Result<Option<ExponentFit<T>>> {
    if norms.iter().all(|&n| n > T::zero()) {
        fit_moderateness(&RegularizedNet::from_norms(ladder.to_vec(), norms.to_vec(), kind)?).map(Some)
    } else {
        Ok(None)
    }
}

/// Solves the regularised problem at every scale and classifies the growth
/// of the solution and velocity nets.
pub fn run_existence<T: Real>(e: &VeryWeakExperiment<T>) -> Result<NetReport<T>> {
    e.validate()?;
    let times = e.times()?;
    let rows = per_epsilon(&e.ladder, |eps| {
        let nu = e.regularised(e.profile, eps)?;
        let q = mollify_potential(&e.nu, &MollifierSpec::new(e.profile, eps)?, e.grid)?.linf_norm();
        let basis = e.basis(&nu)?;
        let (u0, u1) = e.data_at(eps)?;
        let s = solve_data(&basis, &u0, &u1, e.horizon, &times)?;
        Ok((s.sup_l2_norm(), s.sup_dt_l2_norm(), q))
    })?;
    let solution_norms: Vec<T> = rows.iter().map(|r| r.0).collect();
    let velocity_norms: Vec<T> = rows.iter().map(|r| r.1).collect();
    let potential_norms: Vec<T> = rows.iter().map(|r| r.2).collect();
    let fit = |norms: &[T]| {
        fit_moderateness(&RegularizedNet::from_norms(e.ladder.clone(), norms.to_vec(), NormKind::SupTimeL2)?)
    };
    let solution_fit = fit(&solution_norms)?;
    let velocity_fit = fit(&velocity_norms)?;
    let potential_fit = positive_fit(&e.ladder, &potential_norms, NormKind::Linf)?;
    let bound = e.declared_order + lit(EXPONENT_TOLERANCE);
    let verdict = if solution_fit.exponent <= bound && velocity_fit.exponent <= bound {
        Verdict::Moderate
    } else {
        Verdict::NotModerate
    };
    Ok(NetReport {
        ladder: e.ladder.clone(),
        solution_norms,
        velocity_norms,
        potential_norms,
        solution_fit,
        velocity_fit,
        potential_fit,
        declared_order: e.declared_order,
        verdict,
    })
}

/// Perturbation injected at scale `eps^order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct Perturbation<T> {
    pub order: u32,
    /// Added to `nu`, so the potential changes by its derivative.
    #[serde(default = "NuPrimitive::zero")]
    pub w: NuPrimitive<T>,
    #[serde(default = "DataSpec::zero")]
    pub w0: DataSpec,
    #[serde(default = "DataSpec::zero")]
    pub w1: DataSpec,
    /// Regularise the perturbed problem with the other built-in profile.
    #[serde(default)]
    pub alternate_profile: bool,
}

impl<T: Real> Perturbation<T> {
    pub fn potential_only(order: u32, w: NuPrimitive<T>) -> Self {
        Perturbation { order, w, w0: DataSpec::zero(), w1: DataSpec::zero(), alternate_profile: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport<T> {
    pub ladder: Vec<T>,
    /// `sup_t ||u_eps - u~_eps||_{L2}`.
    pub discrepancies: Vec<T>,
    pub identically_zero: bool,
    /// Absent when the discrepancy net vanishes identically.
    pub check: Option<NegligibilityCheck<T>>,
    /// `sup_t ||(q~_eps - q_eps) u~_eps||_{L2}`.
    pub mass_term_norms: Vec<T>,
    /// Ratio of `sup_t ||U_eps||^2` to the forced energy bound driven by the
    /// mass term and the data difference.
    pub mass_term_ratios: Vec<T>,
    pub pass: bool,
}

impl<T: Real> UniquenessReport<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,norm,discrepancy\n");
        for i in 0..self.ladder.len() {
            out.push_str(&format!("{:e},{:e},{:e}\n", self.ladder[i], self.mass_term_norms[i], self.discrepancies[i]));
        }
        out
    }

    pub fn to_dat(&self) -> String {
        let mut out = String::from("# epsilon discrepancy mass_term ratio\n");
        for i in 0..self.ladder.len() {
            out.push_str(&format!(
                "{:e} {:e} {:e} {:e}\n",
                self.ladder[i], self.discrepancies[i], self.mass_term_norms[i], self.mass_term_ratios[i]
            ));
        }
        out
    }
}

fn other_profile(p: MollifierProfile) -> MollifierProfile {
    match p {
        MollifierProfile::Standard => MollifierProfile::Skewed,
        MollifierProfile::Skewed => MollifierProfile::Standard,
    }
}

fn sup_difference<T: Real>(a: &WaveSolution<T>, b: &WaveSolution<T>) -> Result<T> {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| Ok(x.sub(y)?.l2_norm()))
        .try_fold(T::zero(), |m, v: Result<T>| Ok(m.max(v?)))
}

/// Solves the net and a perturbed copy and fits the decay of their
/// difference against `eps^order`.
pub fn run_uniqueness<T: Real>(e: &VeryWeakExperiment<T>, p: &Perturbation<T>) -> Result<UniquenessReport<T>> {
    e.validate()?;
    if p.order == 0 {
        return Err(Error::InvalidInput("perturbation order must be at least 1".into()));
    }
    if p.w.has_atoms() {
        return Err(Error::InvalidInput("potential perturbation must be bounded".into()));
    }
    p.w0.validate()?;
    p.w1.validate()?;
    let grid = e.grid;
    let (w0, w1) = (p.w0.sample::<T>(grid)?, p.w1.sample::<T>(grid)?);
    let tilde_profile = if p.alternate_profile { other_profile(e.profile) } else { e.profile };
    let rows = per_epsilon(&e.ladder, |eps| {
        let scale = eps.powi(p.order as i32);
        let nu = e.regularised(e.profile, eps)?;
        let nu_t = e.regularised(tilde_profile, eps)?.with_added_smooth(scale, p.w.smooth_part(), grid)?;
        let (u0, u1) = e.data_at(eps)?;
        let (v0, v1) = (u0.combine(T::one(), &w0, scale)?, u1.combine(T::one(), &w1, scale)?);
        let basis = e.basis(&nu)?;
        let basis_t = if p.alternate_profile || p.w.smooth_part() != &SmoothPart::Zero {
            e.basis(&nu_t)?
        } else {
            basis.clone()
        };
        // The source term is sampled on a grid fine enough for the Duhamel sums.
        let fine = TimeGrid::for_spectrum(e.horizon, basis.lambda_max().max(basis_t.lambda_max()))?;
        let tg = if fine.steps > e.time_steps { fine } else { TimeGrid::new(e.horizon, e.time_steps)? };
        let times = tg.times();
        let s = solve_data(&basis, &u0, &u1, e.horizon, &times)?;
        let s_t = solve_data(&basis_t, &v0, &v1, e.horizon, &times)?;
        let discrepancy = sup_difference(&s, &s_t)?;

        // U = u - u~ solves the eps-problem with source (q~ - q) u~.
        let q = mollify_potential(&e.nu, &MollifierSpec::new(e.profile, eps)?, grid)?;
        let q_t = mollify_potential(&e.nu, &MollifierSpec::new(tilde_profile, eps)?, grid)?;
        let dq = GridFunction::from_fn(grid, |x| p.w.potential_smooth(x) * scale);
        let dq = q_t.sub(&q)?.combine(T::one(), &dq, T::one())?;
        let source: Vec<GridFunction<T>> = s_t
            .values
            .iter()
            .map(|u| GridFunction::new(grid, dq.values().iter().zip(u.values()).map(|(a, b)| *a * *b).collect()))
            .collect::<Result<_>>()?;
        let mass = source.iter().map(|f| f.l2_norm()).fold(T::zero(), T::max);
        let table = analyze_forcing(&source, &basis, tg)?;
        let (d0, d1) = (u0.sub(&v0)?, u1.sub(&v1)?);
        let problem = WaveProblem::from_data(&basis, &d0, &d1, e.horizon)?.with_forcing(table)?;
        let sol = solve(&problem, &times)?;
        let input = EstimateInput { problem: &problem, solution: &sol, u0: None, u1: None, sobolev_order: T::zero(), label: String::new() };
        let report = verify(EstimateId::Esnh1, &input)?;
        let ratio = if report.rhs > T::zero() { discrepancy * discrepancy / report.rhs } else { T::zero() };
        Ok((discrepancy, mass, ratio))
    })?;
    let discrepancies: Vec<T> = rows.iter().map(|r| r.0).collect();
    let mass_term_norms = rows.iter().map(|r| r.1).collect();
    let mass_term_ratios = rows.iter().map(|r| r.2).collect();
    let net = RegularizedNet::from_norms(e.ladder.clone(), discrepancies.clone(), NormKind::SupTimeL2)?;
    let identically_zero = net.is_identically_zero();
    let check = if identically_zero { None } else { Some(check_negligibility(&net, p.order)?) };
    let pass = check.map_or(true, |c| c.pass);
    Ok(UniquenessReport { ladder: e.ladder.clone(), discrepancies, identically_zero, check, mass_term_norms, mass_term_ratios, pass })
}

/// Discrepancies at or below this level count as quadrature noise.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Relative rise between neighbouring discrepancies tolerated before a spike
/// is flagged.
pub const SPIKE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport<T> {
    pub ladder: Vec<T>,
    /// `sup_t ||u(t) - u_eps(t)||_{L2}` against the unregularised solution.
    pub discrepancies: Vec<T>,
    /// Fitted rate in `discrepancy ~ eps^rate`.
    pub rate: Option<T>,
    pub strictly_decreasing: bool,
    pub at_noise_floor: bool,
    /// Ladder indices `i` with `d[i] > (1 + SPIKE_TOLERANCE) d[i-1]`.
    pub spikes: Vec<usize>,
    pub tolerance: T,
    pub pass: bool,
}

impl<T: Real> ConsistencyReport<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,norm,discrepancy\n");
        for (e, d) in self.ladder.iter().zip(&self.discrepancies) {
            out.push_str(&format!("{:e},{:e},{:e}\n", e, d, d));
        }
        out
    }

    pub fn to_dat(&self) -> String {
        let mut out = String::from("# epsilon discrepancy\n");
        for (e, d) in self.ladder.iter().zip(&self.discrepancies) {
            out.push_str(&format!("{:e} {:e}\n", e, d));
        }
        out
    }
}

/// Compares the regularised net with the solution for the bounded potential
/// itself.
pub fn run_consistency<T: Real>(e: &VeryWeakExperiment<T>, tolerance: T) -> Result<ConsistencyReport<T>> {
    if e.nu.has_atoms() {
        return Err(Error::NotBoundedPotential);
    }
    e.validate()?;
    let times = e.times()?;
    let (u0, u1) = (e.u0.sample::<T>(e.grid)?, e.u1.sample::<T>(e.grid)?);
    let classical = solve_data(&e.basis(&e.nu)?, &u0, &u1, e.horizon, &times)?;
    let discrepancies = per_epsilon(&e.ladder, |eps| {
        let basis = e.basis(&e.regularised(e.profile, eps)?)?;
        let s = solve_data(&basis, &u0, &u1, e.horizon, &times)?;
        sup_difference(&classical, &s)
    })?;
    let floor = lit::<T>(NOISE_FLOOR);
    let at_noise_floor = discrepancies.iter().all(|&d| d <= floor);
    let strictly_decreasing = discrepancies.windows(2).all(|w| w[1] < w[0]);
    let spikes = (1..discrepancies.len())
        .filter(|&i| discrepancies[i] > (T::one() + lit(SPIKE_TOLERANCE)) * discrepancies[i - 1])
        .collect();
    let rate = if discrepancies.iter().all(|&d| d > floor) {
        log_log_slope(&e.ladder, &discrepancies).map(|f| f.slope)
    } else {
        None
    };
    let last = *discrepancies.last().expect("validated ladder");
    let pass = (strictly_decreasing || at_noise_floor) && last <= tolerance;
    Ok(ConsistencyReport { ladder: e.ladder.clone(), discrepancies, rate, strictly_decreasing, at_noise_floor, spikes, tolerance, pass })
}
