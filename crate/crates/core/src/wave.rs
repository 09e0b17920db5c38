//! Wave evolution `u_tt + L u = f` with Dirichlet ends, by separation of
//! variables in an [`EigenBasis`], plus a leapfrog finite-difference solver
//! used as an independent check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CumulativeIntegral, Grid, GridFunction, TimeGrid};
use crate::prufer::EigenBasis;
use crate::real::{compensated_sum, lit, to_f64, Real};
use crate::spectral::{analyze, combine_modes, SpectralCoeffs};

/// Largest `sqrt(lambda_N) * dt` accepted for Duhamel quadrature.
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Mode coefficients `f_n(t_j)` of a source term on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingTable<T> {
    basis_id: String,
    time_grid: TimeGrid<T>,
    /// `coeffs[n - 1][j] = f_n(t_j)`.
    coeffs: Vec<Vec<T>>,
}

impl<T: Real> ForcingTable<T> {
    pub fn zeros(basis: &EigenBasis<T>, time_grid: TimeGrid<T>) -> Self {
        ForcingTable {
            basis_id: basis.id().to_string(),
            time_grid,
            coeffs: vec![vec![T::zero(); time_grid.len()]; basis.len()],
        }
    }

    /// Samples `f(t, x)` on the basis grid at every time node and projects.
    pub fn from_fn(basis: &EigenBasis<T>, time_grid: TimeGrid<T>, f: impl Fn(T, T) -> T + Sync) -> Result<Self> {
        let samples: Vec<GridFunction<T>> = time_grid
            .times()
            .into_par_iter()
            .map(|t| GridFunction::from_fn(basis.grid(), |x| f(t, x)))
            .collect();
        analyze_forcing(&samples, basis, time_grid)
    }

    pub fn time_grid(&self) -> TimeGrid<T> {
        self.time_grid
    }

    pub fn mode(&self, n: usize) -> &[T] {
        &self.coeffs[n - 1]
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len()
    }

    /// `||f(t_j, .)||_{L2}` through Parseval on the retained modes.
    pub fn l2_norm_at(&self, j: usize) -> T {
        compensated_sum(self.coeffs.iter().map(|c| c[j] * c[j])).sqrt()
    }

    /// `max_j ||f(t_j, .)||_{L2}`.
    pub fn sup_l2_norm(&self) -> T {
        (0..self.time_grid.len()).map(|j| self.l2_norm_at(j)).fold(T::zero(), T::max)
    }

    /// `max_j ||(f(t_{j+1}) - f(t_j)) / dt||_{L2}`.
    pub fn sup_dt_l2_norm(&self) -> T {
        let dt = self.time_grid.dt();
        (0..self.time_grid.steps)
            .map(|j| {
                compensated_sum(self.coeffs.iter().map(|c| {
                    let d = (c[j + 1] - c[j]) / dt;
                    d * d
                }))
                .sqrt()
            })
            .fold(T::zero(), T::max)
    }

    /// Multiplies every coefficient by `a`.
    pub fn scaled(&self, a: T) -> Self {
        ForcingTable {
            coeffs: self.coeffs.iter().map(|c| c.iter().map(|&v| a * v).collect()).collect(),
            ..self.clone()
        }
    }
}

/// `f_n(t_j) = <f(t_j, .), phi_n>`.
pub fn analyze_forcing<T: Real>(
    samples: &[GridFunction<T>],
    basis: &EigenBasis<T>,
    time_grid: TimeGrid<T>,
) -> Result<ForcingTable<T>> {
    if samples.len() != time_grid.len() {
        return Err(Error::InvalidInput(format!(
            "{} forcing samples for {} time nodes",
            samples.len(),
            time_grid.len()
        )));
    }
    let per_time = samples.par_iter().map(|f| analyze(f, basis)).collect::<Result<Vec<_>>>()?;
    let coeffs = (0..basis.len()).map(|n| per_time.iter().map(|c| c.values()[n]).collect()).collect();
    Ok(ForcingTable { basis_id: basis.id().to_string(), time_grid, coeffs })
}

#[derive(Debug, Clone)]
pub struct WaveProblem<'a, T> {
    basis: &'a EigenBasis<T>,
    u0: SpectralCoeffs<T>,
    u1: SpectralCoeffs<T>,
    forcing: Option<ForcingTable<T>>,
    horizon: T,
}

impl<'a, T: Real> WaveProblem<'a, T> {
    pub fn new(basis: &'a EigenBasis<T>, u0: SpectralCoeffs<T>, u1: SpectralCoeffs<T>, horizon: T) -> Result<Self> {
        u0.ensure_basis(basis)?;
        u1.ensure_basis(basis)?;
        if !(horizon > T::zero()) {
            return Err(Error::InvalidInput("final time must be positive".into()));
        }
        Ok(WaveProblem { basis, u0, u1, forcing: None, horizon })
    }

    pub fn from_data(basis: &'a EigenBasis<T>, u0: &GridFunction<T>, u1: &GridFunction<T>, horizon: T) -> Result<Self> {
        Self::new(basis, analyze(u0, basis)?, analyze(u1, basis)?, horizon)
    }

    pub fn with_forcing(mut self, forcing: ForcingTable<T>) -> Result<Self> {
        if forcing.basis_id != self.basis.id() || forcing.n_max() != self.basis.len() {
            return Err(Error::InvalidInput("forcing table belongs to another basis".into()));
        }
        let tg = forcing.time_grid;
        if tg.horizon < self.horizon * (T::one() - lit(1e-12)) {
            return Err(Error::InvalidInput(format!(
                "forcing covers [0, {}] but the problem runs to {}",
                tg.horizon, self.horizon
            )));
        }
        self.forcing = Some(forcing);
        Ok(self)
    }

    pub fn basis(&self) -> &'a EigenBasis<T> {
        self.basis
    }

    pub fn u0(&self) -> &SpectralCoeffs<T> {
        &self.u0
    }

    pub fn u1(&self) -> &SpectralCoeffs<T> {
        &self.u1
    }

    pub fn forcing(&self) -> Option<&ForcingTable<T>> {
        self.forcing.as_ref()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    /// Same problem with all data and forcing multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        WaveProblem {
            basis: self.basis,
            u0: self.u0.scaled(c),
            u1: self.u1.scaled(c),
            forcing: self.forcing.as_ref().map(|f| f.scaled(c)),
            horizon: self.horizon,
        }
    }

    fn check_spectrum(&self) -> Result<()> {
        for p in self.basis.pairs() {
            if !(p.lambda > T::zero()) {
                return Err(Error::NonPositiveSpectrum { n: p.n, lambda: to_f64(p.lambda) });
            }
        }
        Ok(())
    }
}

/// Mode amplitudes `u_n(t_j)` and rates `u_n'(t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeHistory<T> {
    pub lambdas: Vec<T>,
    pub amplitude: Vec<Vec<T>>,
    pub rate: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSolution<T> {
    pub times: Vec<T>,
    pub values: Vec<GridFunction<T>>,
    pub dt_values: Vec<GridFunction<T>>,
    /// Present for spectral solutions.
    pub modes: Option<ModeHistory<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary<T> {
    pub times: Vec<T>,
    pub l2_norm: Vec<T>,
    pub dt_l2_norm: Vec<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<Vec<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_drift: Option<T>,
}

impl<T: Real> WaveSolution<T> {
    pub fn grid(&self) -> Grid {
        self.values[0].grid()
    }

    /// `sum_n lambda_n u_n^2 + u_n'^2` at every stored time.
    pub fn energy(&self) -> Option<Vec<T>> {
        let m = self.modes.as_ref()?;
        Some(
            m.amplitude
                .iter()
                .zip(&m.rate)
                .map(|(a, r)| compensated_sum(m.lambdas.iter().zip(a.iter().zip(r)).map(|(&l, (&u, &v))| l * u * u + v * v)))
                .collect(),
        )
    }

    /// `max_t |E(t) - E(0)| / E(0)`; zero for zero energy.
    pub fn energy_drift(&self) -> Option<T> {
        let e = self.energy()?;
        let e0 = e[0];
        if e0 == T::zero() {
            return Some(T::zero());
        }
        Some(e.iter().map(|&v| ((v - e0) / e0).abs()).fold(T::zero(), T::max))
    }

    pub fn l2_norms(&self) -> Vec<T> {
        self.values.iter().map(|u| u.l2_norm()).collect()
    }

    pub fn dt_l2_norms(&self) -> Vec<T> {
        self.dt_values.iter().map(|u| u.l2_norm()).collect()
    }

    /// `max_t ||u(t, .)||_{L2}` over the stored times.
    pub fn sup_l2_norm(&self) -> T {
        self.l2_norms().into_iter().fold(T::zero(), T::max)
    }

    pub fn sup_dt_l2_norm(&self) -> T {
        self.dt_l2_norms().into_iter().fold(T::zero(), T::max)
    }

    pub fn summary(&self) -> SolutionSummary<T> {
        SolutionSummary {
            times: self.times.clone(),
            l2_norm: self.l2_norms(),
            dt_l2_norm: self.dt_l2_norms(),
            energy: self.energy(),
            energy_drift: self.energy_drift(),
        }
    }

    /// Long format `t,x,u,u_t`.
    pub fn to_csv(&self) -> String {
        let grid = self.grid();
        let mut out = String::from("t,x,u,u_t\n");
        for (j, &t) in self.times.iter().enumerate() {
            for i in 0..grid.len() {
                out.push_str(&format!(
                    "{:e},{:e},{:e},{:e}\n",
                    t,
                    grid.x::<T>(i),
                    self.values[j].values()[i],
                    self.dt_values[j].values()[i]
                ));
            }
        }
        out
    }

    fn from_modes(basis: &EigenBasis<T>, times: Vec<T>, amplitude: Vec<Vec<T>>, rate: Vec<Vec<T>>) -> Self {
        let values = amplitude.iter().map(|a| combine_modes(basis, a, |p| &p.phi)).collect();
        let dt_values = rate.iter().map(|r| combine_modes(basis, r, |p| &p.phi)).collect();
        WaveSolution { times, values, dt_values, modes: Some(ModeHistory { lambdas: basis.lambdas(), amplitude, rate }) }
    }
}

fn check_times<T: Real>(times: &[T], horizon: T) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput("no evaluation times".into()));
    }
    let limit = horizon * (T::one() + lit(1e-12));
    if times.iter().any(|&t| !(t >= T::zero() && t <= limit)) {
        return Err(Error::InvalidInput(format!("evaluation times must lie in [0, {horizon}]")));
    }
    Ok(())
}

/// `u_n(t) = A_n cos(w t) + B_n sin(w t) / w`, `w = sqrt(lambda_n)`.
pub fn solve_homogeneous<T: Real>(p: &WaveProblem<'_, T>, times: &[T]) -> Result<WaveSolution<T>> {
    if p.forcing.is_some() {
        return Err(Error::InvalidInput("problem carries a forcing term; use solve_forced".into()));
    }
    p.check_spectrum()?;
    check_times(times, p.horizon)?;
    let omegas: Vec<T> = p.basis.lambdas().iter().map(|l| l.sqrt()).collect();
    let (amplitude, rate): (Vec<Vec<T>>, Vec<Vec<T>>) = times
        .iter()
        .map(|&t| {
            omegas
                .iter()
                .zip(p.u0.values().iter().zip(p.u1.values()))
                .map(|(&w, (&a, &b))| {
                    let (s, c) = (w * t).sin_cos();
                    (a * c + b * s / w, -w * a * s + b * c)
                })
                .unzip()
        })
        .unzip();
    Ok(WaveSolution::from_modes(p.basis, times.to_vec(), amplitude, rate))
}

/// Variation of constants per mode; the Duhamel integrals are cumulative
/// Simpson sums on the forcing time grid.
pub fn solve_forced<T: Real>(p: &WaveProblem<'_, T>, times: &[T]) -> Result<WaveSolution<T>> {
    let forcing = p
        .forcing
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("forced solve needs a forcing table".into()))?;
    p.check_spectrum()?;
    check_times(times, p.horizon)?;
    let tg = forcing.time_grid;
    let dt = tg.dt();
    let product = p.basis.lambda_max().sqrt() * dt;
    if product > lit(MAX_PHASE_PER_STEP) {
        return Err(Error::TimeGridTooCoarse { dt: to_f64(dt), product: to_f64(product) });
    }
    let nodes = tg.times();
    let per_mode: Vec<(Vec<T>, Vec<T>)> = (0..p.basis.len())
        .into_par_iter()
        .map(|k| {
            let w = p.basis.pairs()[k].lambda.sqrt();
            let f = &forcing.coeffs[k];
            let sin_int = CumulativeIntegral::new(dt, nodes.iter().zip(f).map(|(&s, &v)| (w * s).sin() * v).collect());
            let cos_int = CumulativeIntegral::new(dt, nodes.iter().zip(f).map(|(&s, &v)| (w * s).cos() * v).collect());
            let (a, b) = (p.u0.values()[k], p.u1.values()[k]);
            times
                .iter()
                .map(|&t| {
                    let (s, c) = (w * t).sin_cos();
                    let (si, ci) = (sin_int.at(t), cos_int.at(t));
                    let u = a * c + b * s / w - c / w * si + s / w * ci;
                    let v = -w * a * s + b * c + s * si + c * ci;
                    (u, v)
                })
                .unzip()
        })
        .collect();
    let amplitude = (0..times.len()).map(|j| per_mode.iter().map(|m| m.0[j]).collect()).collect();
    let rate = (0..times.len()).map(|j| per_mode.iter().map(|m| m.1[j]).collect()).collect();
    Ok(WaveSolution::from_modes(p.basis, times.to_vec(), amplitude, rate))
}

/// Dispatches on the presence of a forcing table.
pub fn solve<T: Real>(p: &WaveProblem<'_, T>, times: &[T]) -> Result<WaveSolution<T>> {
    if p.forcing.is_some() {
        solve_forced(p, times)
    } else {
        solve_homogeneous(p, times)
    }
}

/// `u_x` everywhere and `u_xx` away from atoms of `q`.
#[derive(Debug, Clone)]
pub struct SpatialDerivatives<T> {
    pub dx: GridFunction<T>,
    dxx: Vec<Option<T>>,
}

impl<T: Real> SpatialDerivatives<T> {
    pub fn dxx_at(&self, i: usize) -> Result<T> {
        self.dxx[i].ok_or(Error::AtomEvaluation { x: to_f64(self.dx.grid().x::<T>(i)) })
    }

    /// `u_xx` on the whole grid; fails at the first atom.
    pub fn dxx(&self) -> Result<GridFunction<T>> {
        let values = (0..self.dxx.len()).map(|i| self.dxx_at(i)).collect::<Result<Vec<T>>>()?;
        GridFunction::new(self.dx.grid(), values)
    }
}

/// `u_x = sum u_n phi_n'` and `u_xx = q u - sum lambda_n u_n phi_n`, at the
/// stored time with index `j`.
pub fn spatial_derivatives<T: Real>(sol: &WaveSolution<T>, basis: &EigenBasis<T>, j: usize) -> Result<SpatialDerivatives<T>> {
    let modes = sol
        .modes
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("spatial derivatives need a spectral solution".into()))?;
    if sol.grid() != basis.grid() || modes.amplitude[j].len() != basis.len() {
        return Err(Error::GridMismatch);
    }
    let amp = &modes.amplitude[j];
    let dx = combine_modes(basis, amp, |p| &p.phi_prime);
    let weighted: Vec<T> = amp.iter().zip(&modes.lambdas).map(|(&a, &l)| a * l).collect();
    let lu = combine_modes(basis, &weighted, |p| &p.phi);
    let nu = basis.nu();
    let grid = basis.grid();
    let u = &sol.values[j];
    let dxx = (0..grid.len())
        .map(|i| {
            let x = grid.x::<T>(i);
            (!nu.is_atom(x)).then(|| nu.potential_smooth(x) * u.values()[i] - lu.values()[i])
        })
        .collect();
    Ok(SpatialDerivatives { dx, dxx })
}

/// Leapfrog for `u_tt = u_xx - q u + f` with homogeneous Dirichlet ends and a
/// Taylor first step. `dt` is rounded down so that it divides `horizon`.
/// Every `stride`-th time level is stored, and always the last one.
pub fn fd_oracle<T: Real>(
    q: &GridFunction<T>,
    u0: &GridFunction<T>,
    u1: &GridFunction<T>,
    forcing: Option<&(dyn Fn(T, T) -> T + Sync)>,
    horizon: T,
    dt: T,
    stride: usize,
) -> Result<WaveSolution<T>> {
    q.ensure_same_grid(u0)?;
    q.ensure_same_grid(u1)?;
    let grid = q.grid();
    let h = grid.h::<T>();
    if !(dt > T::zero()) || dt > h * (T::one() + lit(1e-12)) {
        return Err(Error::CflViolation { dt: to_f64(dt), h: to_f64(h) });
    }
    if !(horizon > T::zero()) {
        return Err(Error::InvalidInput("final time must be positive".into()));
    }
    let stride = stride.max(1);
    let steps = (horizon / dt - lit(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let dt = horizon / lit(steps as f64);
    let n = grid.intervals();
    let xs: Vec<T> = grid.nodes();
    let qv = q.values();
    let r2 = (dt / h) * (dt / h);
    let dt2 = dt * dt;
    let two = lit::<T>(2.0);
    let source = |t: T, i: usize| forcing.map_or(T::zero(), |f| f(t, xs[i]));

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dt_values = Vec::new();
    let mut record = |k: usize, u: &[T], v: Vec<T>| {
        times.push(dt * lit(k as f64));
        values.push(GridFunction::new(grid, u.to_vec()).expect("grid"));
        dt_values.push(GridFunction::new(grid, v).expect("grid"));
    };

    let mut prev = u0.values().to_vec();
    prev[0] = T::zero();
    prev[n] = T::zero();
    let mut cur = vec![T::zero(); n + 1];
    for i in 1..n {
        let lap = prev[i - 1] - two * prev[i] + prev[i + 1];
        cur[i] = prev[i] + dt * u1.values()[i] + (r2 * lap + dt2 * (source(T::zero(), i) - qv[i] * prev[i])) / two;
    }
    let mut v0 = u1.values().to_vec();
    v0[0] = T::zero();
    v0[n] = T::zero();
    record(0, &prev, v0);
    if steps == 1 {
        let v = (0..=n).map(|i| (cur[i] - prev[i]) / dt).collect();
        record(1, &cur, v);
    }

    let mut new = vec![T::zero(); n + 1];
    for k in 1..steps {
        let t = dt * lit(k as f64);
        for i in 1..n {
            let lap = cur[i - 1] - two * cur[i] + cur[i + 1];
            new[i] = two * cur[i] - prev[i] + r2 * lap + dt2 * (source(t, i) - qv[i] * cur[i]);
        }
        if k % stride == 0 {
            let v = (0..=n).map(|i| (new[i] - prev[i]) / (two * dt)).collect();
            record(k, &cur, v);
        }
        if k + 1 == steps {
            // Second-order backward difference at the final level.
            let v = (0..=n).map(|i| (lit::<T>(3.0) * new[i] - lit::<T>(4.0) * cur[i] + prev[i]) / (two * dt)).collect();
            record(steps, &new, v);
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut new);
    }
    Ok(WaveSolution { times, values, dt_values, modes: None })
}

/// Index of the stored time closest to `t`.
pub fn nearest_time_index<T: Real>(times: &[T], t: T) -> usize {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (*a.1 - t).abs().partial_cmp(&(*b.1 - t).abs()).expect("finite times"))
        .map(|(j, _)| j)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{mollify_potential, MollifierSpec, NuPrimitive, SmoothPart};
    use crate::prufer::{build_basis, PruferOptions};
    use crate::spectral::synthesize;
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn basis(nu: &NuPrimitive<f64>, n: usize, intervals: usize) -> EigenBasis<f64> {
        build_basis(nu, n, Grid::new(intervals).unwrap(), &PruferOptions::default()).unwrap()
    }

    fn free() -> &'static EigenBasis<f64> {
        static B: OnceLock<EigenBasis<f64>> = OnceLock::new();
        B.get_or_init(|| basis(&NuPrimitive::zero(), 20, 512))
    }

    fn l2_diff(a: &GridFunction<f64>, b: &GridFunction<f64>) -> f64 {
        a.sub(b).unwrap().l2_norm()
    }

    fn gf(g: Grid, f: impl Fn(f64) -> f64) -> GridFunction<f64> {
        GridFunction::from_fn(g, f)
    }

    #[test]
    fn standing_wave_half_period() {
        let b = free();
        let g = b.grid();
        let p = WaveProblem::from_data(b, &gf(g, |x| (PI * x).sin()), &GridFunction::zeros(g), 1.0).unwrap();
        let s = solve_homogeneous(&p, &[0.0, 0.5, 1.0]).unwrap();
        assert!(l2_diff(&s.values[2], &gf(g, |x| -(PI * x).sin())) < 1e-8);
        assert!(s.values[1].linf_norm() < 1e-8);
        assert!(l2_diff(&s.values[0], &gf(g, |x| (PI * x).sin())) < 1e-8);
    }

    #[test]
    fn velocity_data_only() {
        let b = free();
        let g = b.grid();
        let p = WaveProblem::from_data(b, &GridFunction::zeros(g), &gf(g, |x| (2.0 * PI * x).sin()), 1.0).unwrap();
        let times: Vec<f64> = (0..=10).map(|j| j as f64 * 0.1).collect();
        let s = solve_homogeneous(&p, &times).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let exact = gf(g, |x| (2.0 * PI * t).sin() * (2.0 * PI * x).sin() / (2.0 * PI));
            assert!(l2_diff(&s.values[j], &exact) < 1e-9);
            let exact_dt = gf(g, |x| (2.0 * PI * t).cos() * (2.0 * PI * x).sin());
            assert!(l2_diff(&s.dt_values[j], &exact_dt) < 1e-8);
        }
    }

    #[test]
    fn homogeneous_rejects_forcing_and_bad_times() {
        let b = free();
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let z = SpectralCoeffs::zeros(b);
        let p = WaveProblem::new(b, z.clone(), z.clone(), 1.0).unwrap();
        assert!(solve_homogeneous(&p, &[2.0]).is_err());
        let pf = p.with_forcing(ForcingTable::zeros(b, tg)).unwrap();
        assert!(solve_homogeneous(&pf, &[0.5]).is_err());
    }

    #[test]
    fn boundary_values_vanish_and_energy_is_conserved() {
        let nu = NuPrimitive::delta(0.5, 2.0).unwrap();
        let b = basis(&nu, 20, 512);
        let g = b.grid();
        let p = WaveProblem::from_data(&b, &gf(g, |x| x * (1.0 - x)), &gf(g, |x| x * x * (1.0 - x)), 4.0).unwrap();
        let times = TimeGrid::new(4.0, 199).unwrap().times();
        let s = solve_homogeneous(&p, &times).unwrap();
        for u in &s.values {
            assert!(u.values()[0].abs() + u.values()[g.intervals()].abs() <= 1e-12);
        }
        assert!(s.energy_drift().unwrap() <= 1e-10);
        let m = s.modes.as_ref().unwrap();
        for n in 0..b.len() {
            let e = |j: usize| m.lambdas[n] * m.amplitude[j][n].powi(2) + m.rate[j][n].powi(2);
            let e0 = e(0);
            for j in 0..times.len() {
                assert!((e(j) - e0).abs() <= 1e-10 * e0.max(1e-300));
            }
        }
    }

    #[test]
    fn time_reversal_recovers_data() {
        let nu = NuPrimitive::delta(0.5, 1.0).unwrap();
        let b = basis(&nu, 20, 512);
        let g = b.grid();
        let p = WaveProblem::from_data(&b, &gf(g, |x| (3.0 * x).sin() * x * (1.0 - x)), &gf(g, |x| x * (1.0 - x)), 2.0)
            .unwrap();
        let s = solve_homogeneous(&p, &[2.0]).unwrap();
        let m = s.modes.as_ref().unwrap();
        let back_u0 = SpectralCoeffs::from_values(&b, m.amplitude[0].clone()).unwrap();
        let back_u1 = SpectralCoeffs::from_values(&b, m.rate[0].iter().map(|v| -v).collect()).unwrap();
        let r = solve_homogeneous(&WaveProblem::new(&b, back_u0, back_u1, 2.0).unwrap(), &[2.0]).unwrap();
        let rm = r.modes.as_ref().unwrap();
        for n in 0..b.len() {
            assert!((rm.amplitude[0][n] - p.u0().values()[n]).abs() < 1e-12);
            assert!((rm.rate[0][n] + p.u1().values()[n]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_forcing_closed_form() {
        let b = free();
        let g = b.grid();
        let tg = TimeGrid::for_spectrum(2.0, b.lambda_max()).unwrap();
        let table = ForcingTable::from_fn(b, tg, |_, x| (PI * x).sin()).unwrap();
        let z = SpectralCoeffs::zeros(b);
        let p = WaveProblem::new(b, z.clone(), z, 2.0).unwrap().with_forcing(table).unwrap();
        let s = solve_forced(&p, &tg.times()).unwrap();
        for (j, &t) in s.times.iter().enumerate() {
            let exact = gf(g, |x| (1.0 - (PI * t).cos()) / (PI * PI) * (PI * x).sin());
            assert!(l2_diff(&s.values[j], &exact) <= 1e-6, "t = {t}");
        }
    }

    #[test]
    fn resonant_forcing_closed_form() {
        let b = free();
        let g = b.grid();
        let tg = TimeGrid::for_spectrum(2.0, b.lambda_max()).unwrap();
        let table = ForcingTable::from_fn(b, tg, |t, x| (PI * x).sin() * (PI * t).cos()).unwrap();
        let z = SpectralCoeffs::zeros(b);
        let p = WaveProblem::new(b, z.clone(), z, 2.0).unwrap().with_forcing(table).unwrap();
        let times: Vec<f64> = (0..=40).map(|j| j as f64 * 0.05).collect();
        let s = solve_forced(&p, &times).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let exact = gf(g, |x| t * (PI * t).sin() * (PI * x).sin() / (2.0 * PI));
            assert!(l2_diff(&s.values[j], &exact) <= 1e-5, "t = {t}");
        }
    }

    #[test]
    fn zero_forcing_reduces_to_homogeneous() {
        let nu = NuPrimitive::delta(0.5, 1.0).unwrap();
        let b = basis(&nu, 20, 512);
        let g = b.grid();
        let p = WaveProblem::from_data(&b, &gf(g, |x| x * (1.0 - x)), &gf(g, |x| (PI * x).sin()), 1.0).unwrap();
        let tg = TimeGrid::for_spectrum(1.0, b.lambda_max()).unwrap();
        let times = tg.times();
        let h = solve_homogeneous(&p, &times).unwrap();
        let f = solve_forced(&p.clone().with_forcing(ForcingTable::zeros(&b, tg)).unwrap(), &times).unwrap();
        let (hm, fm) = (h.modes.unwrap(), f.modes.unwrap());
        for j in 0..times.len() {
            for n in 0..b.len() {
                assert!((hm.amplitude[j][n] - fm.amplitude[j][n]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn coarse_time_grid_rejected() {
        let b = free();
        let tg = TimeGrid::new(1.0, 10).unwrap();
        let z = SpectralCoeffs::zeros(b);
        let p = WaveProblem::new(b, z.clone(), z, 1.0).unwrap().with_forcing(ForcingTable::zeros(b, tg)).unwrap();
        assert!(matches!(solve_forced(&p, &[0.5]), Err(Error::TimeGridTooCoarse { .. })));
        let missing = WaveProblem::new(b, SpectralCoeffs::zeros(b), SpectralCoeffs::zeros(b), 1.0).unwrap();
        assert!(solve_forced(&missing, &[0.5]).is_err());
    }

    #[test]
    fn duhamel_modes_satisfy_the_ode() {
        let nu = NuPrimitive::smooth(SmoothPart::Linear(3.0));
        let b = basis(&nu, 10, 256);
        let rates: Vec<f64> = [200usize, 400]
            .iter()
            .map(|&steps| {
                let tg = TimeGrid::new(1.0, steps).unwrap();
                let table = ForcingTable::from_fn(&b, tg, |t, x| (2.0 * t).cos() * x * (1.0 - x)).unwrap();
                let z = SpectralCoeffs::zeros(&b);
                let p = WaveProblem::new(&b, z.clone(), z, 1.0).unwrap().with_forcing(table.clone()).unwrap();
                let times = tg.times();
                let s = solve_forced(&p, &times).unwrap();
                let m = s.modes.unwrap();
                let dt = tg.dt();
                let mut worst = 0.0f64;
                for n in 0..3 {
                    for j in 1..steps {
                        let u = |k: usize| m.amplitude[k][n];
                        let acc = (u(j + 1) - 2.0 * u(j) + u(j - 1)) / (dt * dt);
                        worst = worst.max((acc + m.lambdas[n] * u(j) - table.mode(n + 1)[j]).abs());
                    }
                }
                worst
            })
            .collect();
        assert!(rates[0] / rates[1] > 3.5, "{rates:?}");
    }

    #[test]
    fn forcing_projection() {
        let b = free();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let phi3 = b.pair(3).phi.clone();
        let samples: Vec<_> = tg.times().iter().map(|&t| phi3.scaled(t * t + 1.0)).collect();
        let table = analyze_forcing(&samples, b, tg).unwrap();
        for (j, &t) in tg.times().iter().enumerate() {
            assert!((table.mode(3)[j] - (t * t + 1.0)).abs() < 1e-9);
            for n in [1, 2, 4, 10] {
                assert!(table.mode(n)[j].abs() < 1e-9);
            }
        }
        let zero = ForcingTable::from_fn(b, tg, |_, _| 0.0).unwrap();
        assert!((1..=b.len()).all(|n| zero.mode(n).iter().all(|&v| v == 0.0)));
        let tx = ForcingTable::from_fn(b, tg, |t, x| t * x).unwrap();
        let cx = analyze(&gf(b.grid(), |x| x), b).unwrap();
        for (j, &t) in tg.times().iter().enumerate() {
            for n in 1..=b.len() {
                assert!((tx.mode(n)[j] - t * cx.get(n)).abs() < 1e-14);
            }
        }
        assert!(analyze_forcing(&samples[..3], b, tg).is_err());
    }

    #[test]
    fn free_spatial_derivatives() {
        let b = free();
        let g = b.grid();
        let p = WaveProblem::from_data(b, &gf(g, |x| (PI * x).sin()), &GridFunction::zeros(g), 1.0).unwrap();
        let s = solve_homogeneous(&p, &[0.0]).unwrap();
        let d = spatial_derivatives(&s, b, 0).unwrap();
        assert!((d.dx.values()[0] - PI).abs() < 1e-8);
        let dxx = d.dxx().unwrap();
        assert!(l2_diff(&dxx, &gf(g, |x| -PI * PI * (PI * x).sin())) < 1e-6);
    }

    #[test]
    fn atom_blocks_second_derivative_and_jumps_first() {
        let alpha = 1.0;
        let nu = NuPrimitive::delta(0.5, alpha).unwrap();
        let b = basis(&nu, 40, 1024);
        let g = b.grid();
        let p = WaveProblem::from_data(&b, &gf(g, |x| x * (1.0 - x)), &GridFunction::zeros(g), 1.0).unwrap();
        let s = solve_homogeneous(&p, &[0.3]).unwrap();
        let d = spatial_derivatives(&s, &b, 0).unwrap();
        let mid = g.node_index(0.5).unwrap();
        assert!(matches!(d.dxx_at(mid), Err(Error::AtomEvaluation { .. })));
        assert!(d.dxx().is_err());
        assert!(d.dxx_at(mid - 3).is_ok());
        // Jump of u_x across the atom from one-sided quadratic extrapolation.
        let v = d.dx.values();
        let left = 3.0 * v[mid - 1] - 3.0 * v[mid - 2] + v[mid - 3];
        let right = 3.0 * v[mid + 1] - 3.0 * v[mid + 2] + v[mid + 3];
        let u_mid = s.values[0].values()[mid];
        assert!(((right - left) - alpha * u_mid).abs() <= 2e-3, "{} vs {}", right - left, alpha * u_mid);
    }

    #[test]
    fn fd_free_standing_wave() {
        let g = Grid::new(400).unwrap();
        let h = g.h::<f64>();
        let s = fd_oracle(&GridFunction::zeros(g), &gf(g, |x| (PI * x).sin()), &GridFunction::zeros(g), None, 1.0, h / 2.0, 100)
            .unwrap();
        let last = s.values.last().unwrap();
        assert!(l2_diff(last, &gf(g, |x| -(PI * x).sin())) <= 5e-5);
        let g2 = Grid::new(800).unwrap();
        let s2 = fd_oracle(
            &GridFunction::zeros(g2),
            &gf(g2, |x| (PI * x).sin()),
            &GridFunction::zeros(g2),
            None,
            1.0,
            g2.h::<f64>() / 2.0,
            100,
        )
        .unwrap();
        let e1 = l2_diff(last, &gf(g, |x| -(PI * x).sin()));
        let e2 = l2_diff(s2.values.last().unwrap(), &gf(g2, |x| -(PI * x).sin()));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn fd_zero_and_cfl() {
        let g = Grid::new(50).unwrap();
        let z = GridFunction::<f64>::zeros(g);
        let s = fd_oracle(&z, &z, &z, None, 1.0, 0.01, 1).unwrap();
        assert!(s.values.iter().all(|u| u.values().iter().all(|&v| v == 0.0)));
        assert!(matches!(fd_oracle(&z, &z, &z, None, 1.0, 0.03, 1), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn fd_matches_spectral_for_constant_potential() {
        let nu = NuPrimitive::smooth(SmoothPart::Linear(5.0));
        let b = basis(&nu, 40, 400);
        let g = b.grid();
        let u0 = gf(g, |x| 20.0 * (x * (1.0 - x)).powi(3));
        let u1 = gf(g, |x| (PI * x).sin().powi(3));
        let p = WaveProblem::from_data(&b, &u0, &u1, 1.0).unwrap();
        let spec = solve_homogeneous(&p, &[1.0]).unwrap();
        let q = gf(g, |_| 5.0);
        let fd = fd_oracle(&q, &u0, &u1, None, 1.0, g.h::<f64>() / 2.0, 100).unwrap();
        assert!(l2_diff(&spec.values[0], fd.values.last().unwrap()) <= 1e-4);
    }

    #[test]
    fn fd_matches_spectral_for_mollified_delta() {
        // The oracle needs a bounded potential; eps = 1e-3 needs h <= 2.5e-4.
        let nu = NuPrimitive::delta(0.5, 1.0).unwrap();
        let g = Grid::new(4000).unwrap();
        let b = basis(&nu, 40, 4000);
        let u0 = gf(g, |x| x * (1.0 - x));
        let z = GridFunction::zeros(g);
        let spec = solve_homogeneous(&WaveProblem::from_data(&b, &u0, &z, 1.0).unwrap(), &[1.0]).unwrap();
        let q = mollify_potential(&nu, &MollifierSpec::standard(1e-3).unwrap(), g).unwrap();
        let fd = fd_oracle(&q, &u0, &z, None, 1.0, g.h::<f64>() / 2.0, 1000).unwrap();
        assert!(l2_diff(&spec.values[0], fd.values.last().unwrap()) <= 2e-3);
    }

    #[test]
    fn synthesis_at_zero_matches_data() {
        let nu = NuPrimitive::delta(0.25, 1.5).unwrap();
        let b = basis(&nu, 20, 512);
        let g = b.grid();
        let u0 = gf(g, |x| x * (1.0 - x));
        let p = WaveProblem::from_data(&b, &u0, &GridFunction::zeros(g), 1.0).unwrap();
        let s = solve_homogeneous(&p, &[0.0]).unwrap();
        assert!(l2_diff(&s.values[0], &synthesize(p.u0(), &b).unwrap()) < 1e-14);
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), g.len() + 1);
        assert!(serde_json::to_string(&s.summary()).unwrap().contains("energy_drift"));
    }
}
