//! Dirichlet eigenpairs of `-y'' + q y` through the modified Prüfer system,
//! which only involves the primitive `nu` and never `q` itself.
//!
//! With `y = r sin(theta)` and `y' - nu y = sqrt(lambda) r cos(theta)`,
//! writing `theta = sqrt(lambda) x + eta`:
//!
//! ```text
//! eta'   = nu^2 sin^2(theta) / sqrt(lambda) + nu sin(2 theta)
//! log r' = -(nu^2 sin(2 theta) / (2 sqrt(lambda)) + nu cos(2 theta))
//! ```
//!
//! `eta` stays bounded in `lambda`, so integrating it instead of `theta`
//! keeps the tolerance meaningful for high modes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::ode::{DormandPrince, Tolerance};
use crate::potential::NuPrimitive;
use crate::real::{lit, to_f64, Real};

/// Largest Gram deviation accepted by [`build_basis`].
pub const GRAM_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct PruferOptions<T> {
    pub tolerance: Tolerance<T>,
    /// Accepted `|theta(1, lambda_n) - n pi|`.
    pub residual_tol: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for PruferOptions<T> {
    fn default() -> Self {
        PruferOptions {
            tolerance: Tolerance { atol: T::resolvable(1e-11), rtol: T::resolvable(1e-11) },
            residual_tol: T::resolvable(1e-10),
            max_iterations: 200,
        }
    }
}

/// Prüfer phase and amplitude sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruferPath<T> {
    pub lambda: T,
    pub grid: Grid,
    pub theta: Vec<T>,
    pub log_r: Vec<T>,
    pub eta: Vec<T>,
}

impl<T: Real> PruferPath<T> {
    pub fn theta_end(&self) -> T {
        *self.theta.last().expect("grid has nodes")
    }

    pub fn r(&self, i: usize) -> T {
        self.log_r[i].exp()
    }

    pub fn is_phase_increasing(&self) -> bool {
        self.theta.windows(2).all(|w| w[1] > w[0])
    }
}

/// Integrates the phase/amplitude system for one trial `lambda`, recording
/// every grid node. Panels are cut at grid nodes and at every breakpoint of
/// `nu`, so the right-hand side is smooth on each panel.
pub fn integrate_prufer<T: Real>(
    nu: &NuPrimitive<T>,
    lambda: T,
    grid: Grid,
    opts: &PruferOptions<T>,
) -> Result<PruferPath<T>> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::NonPositiveLambda { lambda: to_f64(lambda) });
    }
    let sqrt_l = lambda.sqrt();
    let inv = T::one() / sqrt_l;
    let half = lit::<T>(0.5);
    let cuts = nu.breakpoints();
    let tiny = grid.h::<T>() * lit(1e-9);

    let mut dp = DormandPrince::new(opts.tolerance);
    let mut y = [T::zero(); 2];
    // One free half-oscillation per initial step is a safe first guess.
    let mut h = grid.h::<T>().min(inv);
    let n = grid.len();
    let mut eta = vec![T::zero(); n];
    let mut log_r = vec![T::zero(); n];
    let mut c = 0;

    for i in 0..grid.intervals() {
        let a: T = grid.x(i);
        let b: T = grid.x(i + 1);
        while c < cuts.len() && cuts[c] <= a + tiny {
            c += 1;
        }
        let mut left = a;
        loop {
            let right = if c < cuts.len() && cuts[c] < b - tiny {
                c += 1;
                cuts[c - 1]
            } else {
                b
            };
            let panel = nu.panel_of((left + right) * half);
            let rhs = |x: T, y: &[T; 2]| {
                let v = nu.evaluate_on_panel(x, panel);
                let theta = sqrt_l * x + y[0];
                let (s2, c2) = (theta + theta).sin_cos();
                let sin_sq = (T::one() - c2) * half;
                [v * v * sin_sq * inv + v * s2, -(v * v * s2 * half * inv + v * c2)]
            };
            dp.segment(&rhs, left, right, &mut y, &mut h)?;
            if right == b {
                break;
            }
            left = right;
        }
        eta[i + 1] = y[0];
        log_r[i + 1] = y[1];
    }

    let theta = (0..n).map(|i| sqrt_l * grid.x::<T>(i) + eta[i]).collect();
    Ok(PruferPath { lambda, grid, theta, log_r, eta })
}

/// Normalised Dirichlet eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair<T> {
    pub n: usize,
    pub lambda: T,
    pub phi: GridFunction<T>,
    pub phi_prime: GridFunction<T>,
    pub path: PruferPath<T>,
    /// `||r sin(theta)||_{L2}` before normalisation.
    pub tilde_norm: T,
    /// `theta(1, lambda_n) - n pi`.
    pub theta_residual: T,
}

impl<T: Real> EigenPair<T> {
    /// Sign changes of `phi` across interior nodes; samples within `1e-12`
    /// of zero (e.g. a node exactly on a zero) are skipped.
    pub fn sign_changes(&self) -> usize {
        let v = self.phi.values();
        let cut = lit::<T>(1e-12) * self.phi.linf_norm();
        let mut last = T::zero();
        let mut count = 0;
        for &x in &v[1..v.len() - 1] {
            if x.abs() <= cut {
                continue;
            }
            if last != T::zero() && (x > T::zero()) != (last > T::zero()) {
                count += 1;
            }
            last = x;
        }
        count
    }

    /// `r sin(theta)` with the Dirichlet endpoints forced to zero.
    pub fn tilde_phi(&self) -> GridFunction<T> {
        tilde_from_path(&self.path)
    }
}

fn tilde_from_path<T: Real>(path: &PruferPath<T>) -> GridFunction<T> {
    let n = path.theta.len();
    let values = (0..n)
        .map(|i| if i == 0 || i == n - 1 { T::zero() } else { path.r(i) * path.theta[i].sin() })
        .collect();
    GridFunction::new(path.grid, values).expect("path is sampled on its grid")
}

fn assemble_pair<T: Real>(nu: &NuPrimitive<T>, n: usize, path: PruferPath<T>) -> Result<EigenPair<T>> {
    let tilde = tilde_from_path(&path);
    let tilde_norm = tilde.l2_norm();
    if !(tilde_norm > T::zero()) {
        return Err(Error::at_mode(n, Error::InvalidInput("eigenfunction vanishes identically".into())));
    }
    let phi = tilde.scaled(T::one() / tilde_norm);
    let theta_residual = path.theta_end() - lit::<T>(n as f64) * T::PI();
    let mut pair = EigenPair {
        n,
        lambda: path.lambda,
        phi_prime: GridFunction::zeros(path.grid),
        phi,
        path,
        tilde_norm,
        theta_residual,
    };
    pair.phi_prime = eigen_derivative(&pair, nu);
    Ok(pair)
}

/// `phi_n' = sqrt(lambda_n) r cos(theta) / ||phi~|| + nu phi_n`, with the left
/// limit of `nu` at jumps.
pub fn eigen_derivative<T: Real>(pair: &EigenPair<T>, nu: &NuPrimitive<T>) -> GridFunction<T> {
    let path = &pair.path;
    let grid = path.grid;
    let scale = pair.lambda.sqrt() / pair.tilde_norm;
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.x::<T>(i);
            scale * path.r(i) * path.theta[i].cos() + nu.evaluate(x) * pair.phi.values()[i]
        })
        .collect();
    GridFunction::new(grid, values).expect("path is sampled on its grid")
}

/// Lower end for trial eigenvalues; below it the square root in the phase
/// equations stops being meaningful.
fn lambda_floor<T: Real>() -> T {
    lit(1e-6)
}

/// Finds `lambda_n` with `|theta(1, lambda_n) - n pi| <= residual_tol`.
pub fn shoot_eigenvalue<T: Real>(
    nu: &NuPrimitive<T>,
    n: usize,
    grid: Grid,
    opts: &PruferOptions<T>,
) -> Result<EigenPair<T>> {
    if n == 0 {
        return Err(Error::InvalidInput("mode index starts at 1".into()));
    }
    let target = lit::<T>(n as f64) * T::PI();
    let g = |lambda: T| -> Result<(T, PruferPath<T>)> {
        let path = integrate_prufer(nu, lambda, grid, opts).map_err(|e| Error::at_mode(n, e))?;
        Ok((path.theta_end() - target, path))
    };

    let base = target * target;
    let two_n = lit::<T>(2.0 / n as f64);
    let floor = lambda_floor::<T>();
    let mut c = T::zero();
    let (mut a, mut fa, mut b, mut fb);
    let mut best: Option<(T, PruferPath<T>)> = None;
    let mut attempts = 0;
    loop {
        a = (base * (T::one() - two_n - c)).max(floor);
        b = base * (T::one() + two_n + c);
        let (ga, pa) = g(a)?;
        let (gb, pb) = g(b)?;
        fa = ga;
        fb = gb;
        if fa.abs() <= opts.residual_tol {
            best = Some((fa, pa));
            break;
        }
        if fb.abs() <= opts.residual_tol {
            best = Some((fb, pb));
            break;
        }
        if fa < T::zero() && fb > T::zero() {
            break;
        }
        attempts += 1;
        if (fa > T::zero() && a == floor) || attempts > 60 || !b.is_finite() {
            return Err(Error::BracketFailure { n, lo: to_f64(a), hi: to_f64(b) });
        }
        c = if c == T::zero() { lit(0.5) } else { c + c };
    }

    if best.is_none() {
        // Illinois-modified regula falsi with a bisection fallback whenever
        // the bracket fails to halve.
        let mut side = 0i8;
        let mut width = b - a;
        let mut force_bisect = false;
        let mut closest: Option<(T, PruferPath<T>)> = None;
        for _ in 0..opts.max_iterations {
            let mut x = if force_bisect { (a + b) * lit(0.5) } else { (a * fb - b * fa) / (fb - fa) };
            if !(x > a && x < b) {
                x = (a + b) * lit(0.5);
            }
            let (fx, px) = g(x)?;
            if closest.as_ref().map_or(true, |(r, _)| fx.abs() < r.abs()) {
                closest = Some((fx, px));
            }
            if fx.abs() <= opts.residual_tol {
                break;
            }
            if fx > T::zero() {
                b = x;
                fb = fx;
                if side == 1 {
                    fa = fa * lit(0.5);
                }
                side = 1;
            } else {
                a = x;
                fa = fx;
                if side == -1 {
                    fb = fb * lit(0.5);
                }
                side = -1;
            }
            let new_width = b - a;
            force_bisect = new_width > width * lit(0.5);
            width = new_width;
            if width <= b.abs() * T::epsilon() * lit(4.0) {
                break;
            }
        }
        best = closest;
    }

    let (residual, path) = best.expect("at least one trial evaluated");
    if residual.abs() > opts.residual_tol {
        return Err(Error::ResidualTooLarge { n, residual: to_f64(residual) });
    }
    assemble_pair(nu, n, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EigenBasis<T> {
    pairs: Vec<EigenPair<T>>,
    nu: NuPrimitive<T>,
    grid: Grid,
    id: String,
}

/// Short content hash of the grid, potential and eigenvalues.
fn fingerprint<T: Real>(grid: Grid, nu: &NuPrimitive<T>, lambdas: &[T]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((grid.intervals() as u64).to_le_bytes());
    hasher.update(serde_json::to_vec(nu).expect("nu serialises"));
    for l in lambdas {
        hasher.update(to_f64(*l).to_bits().to_le_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

impl<T: Real> EigenBasis<T> {
    fn from_pairs(nu: &NuPrimitive<T>, grid: Grid, pairs: Vec<EigenPair<T>>) -> Result<Self> {
        for w in pairs.windows(2) {
            if !(w[1].lambda > w[0].lambda) {
                return Err(Error::NonMonotoneSpectrum { n: w[1].n });
            }
        }
        let lambdas: Vec<T> = pairs.iter().map(|p| p.lambda).collect();
        let basis = EigenBasis { id: fingerprint(grid, nu, &lambdas), pairs, nu: nu.clone(), grid };
        let deviation = basis.gram_deviation();
        if !(deviation <= T::resolvable(GRAM_TOLERANCE)) {
            return Err(Error::NotOrthonormal { deviation: to_f64(deviation) });
        }
        Ok(basis)
    }

    pub fn pairs(&self) -> &[EigenPair<T>] {
        &self.pairs
    }

    pub fn pair(&self, n: usize) -> &EigenPair<T> {
        &self.pairs[n - 1]
    }

    pub fn nu(&self) -> &NuPrimitive<T> {
        &self.nu
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lambdas(&self) -> Vec<T> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    pub fn lambda_max(&self) -> T {
        self.pairs.last().map_or(T::zero(), |p| p.lambda)
    }

    /// `max_{m,n} |<phi_m, phi_n> - delta_mn|`.
    pub fn gram_deviation(&self) -> T {
        let n = self.pairs.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        let g = self.pairs[i].phi.inner(&self.pairs[j].phi).expect("shared grid");
                        let target = if i == j { T::one() } else { T::zero() };
                        (g - target).abs()
                    })
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max)
    }

    /// Largest off-diagonal Gram entry.
    pub fn max_off_diagonal(&self) -> T {
        let n = self.pairs.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| self.pairs[i].phi.inner(&self.pairs[j].phi).expect("shared grid").abs())
                    .fold(T::zero(), T::max)
            })
            .reduce(T::zero, T::max)
    }

    /// Rows `n,lambda_n,residual,tilde_norm,psi_norm`.
    pub fn to_csv(&self) -> String {
        let report = asymptotic_residuals(self);
        let mut out = String::from("n,lambda_n,residual,tilde_norm,psi_norm\n");
        for (p, r) in self.pairs.iter().zip(&report.modes) {
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e}\n",
                p.n, p.lambda, p.theta_residual, p.tilde_norm, r.psi_norm
            ));
        }
        out
    }

    pub fn cache(&self, with_samples: bool) -> BasisCache<T> {
        BasisCache {
            basis_id: self.id.clone(),
            grid: self.grid,
            nu: self.nu.clone(),
            eigenvalues: self.lambdas(),
            samples: with_samples.then(|| self.pairs.iter().map(|p| p.phi.values().to_vec()).collect()),
        }
    }

    /// Rebuilds a basis from cached eigenvalues by re-integrating each path;
    /// the phase residual is checked again.
    pub fn from_cache(cache: &BasisCache<T>, opts: &PruferOptions<T>) -> Result<Self> {
        let pairs = cache
            .eigenvalues
            .par_iter()
            .enumerate()
            .map(|(i, &lambda)| {
                let n = i + 1;
                let path = integrate_prufer(&cache.nu, lambda, cache.grid, opts).map_err(|e| Error::at_mode(n, e))?;
                let pair = assemble_pair(&cache.nu, n, path)?;
                if pair.theta_residual.abs() > opts.residual_tol {
                    return Err(Error::ResidualTooLarge { n, residual: to_f64(pair.theta_residual) });
                }
                Ok(pair)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(&cache.nu, cache.grid, pairs)
    }
}

/// Reusable record of a computed basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct BasisCache<T> {
    pub basis_id: String,
    pub grid: Grid,
    pub nu: NuPrimitive<T>,
    pub eigenvalues: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<T>>>,
}

/// Inner products use composite Simpson, which loses its order when a kink
/// of the eigenfunctions falls inside a panel.
fn check_atoms_on_panel_edges<T: Real>(nu: &NuPrimitive<T>, grid: Grid) -> Result<()> {
    for j in nu.jumps() {
        if j.height == T::zero() {
            continue;
        }
        match grid.node_index(j.location) {
            Some(i) if i % 2 == 0 => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "atom at {} is not an even node of the {}-interval grid",
                    j.location,
                    grid.intervals()
                )))
            }
        }
    }
    Ok(())
}

/// Eigenpairs `1..=n_max`, computed independently per mode.
pub fn build_basis<T: Real>(
    nu: &NuPrimitive<T>,
    n_max: usize,
    grid: Grid,
    opts: &PruferOptions<T>,
) -> Result<EigenBasis<T>> {
    if n_max == 0 {
        return Err(Error::InvalidInput("basis size must be at least 1".into()));
    }
    check_atoms_on_panel_edges(nu, grid)?;
    let pairs = (1..=n_max)
        .into_par_iter()
        .map(|n| shoot_eigenvalue(nu, n, grid, opts))
        .collect::<Result<Vec<_>>>()?;
    EigenBasis::from_pairs(nu, grid, pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual<T> {
    pub n: usize,
    /// `||phi~_n - sin(sqrt(lambda_n) x)||_{L2}`.
    pub psi_norm: T,
    /// `||r_n - 1||_{L2}`.
    pub rho_norm: T,
    /// `sum_{m <= n} psi_norm_m^2`.
    pub psi_partial_sum: T,
    /// `n |lambda_n / (pi n)^2 - 1|`.
    pub scaled_deviation: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    pub modes: Vec<ModeResidual<T>>,
    pub nu_l2: T,
    /// `max_n ||rho_n|| / ||nu||`, absent for `nu = 0`.
    pub rho_constant: Option<T>,
    /// `max_n n |lambda_n / (pi n)^2 - 1|`.
    pub asymptotic_constant: T,
}

pub fn asymptotic_residuals<T: Real>(basis: &EigenBasis<T>) -> ResidualReport<T> {
    let grid = basis.grid;
    let mut partial = T::zero();
    let modes: Vec<ModeResidual<T>> = basis
        .pairs
        .iter()
        .map(|p| {
            let k = p.lambda.sqrt();
            let tilde = p.tilde_phi();
            let psi = GridFunction::from_fn(grid, |x| -(k * x).sin())
                .combine(T::one(), &tilde, T::one())
                .expect("shared grid");
            let rho = GridFunction::new(grid, p.path.log_r.iter().map(|l| l.exp() - T::one()).collect())
                .expect("path is sampled on its grid");
            let psi_norm = psi.l2_norm();
            partial = partial + psi_norm * psi_norm;
            let npi = lit::<T>(p.n as f64) * T::PI();
            ModeResidual {
                n: p.n,
                psi_norm,
                rho_norm: rho.l2_norm(),
                psi_partial_sum: partial,
                scaled_deviation: lit::<T>(p.n as f64) * (p.lambda / (npi * npi) - T::one()).abs(),
            }
        })
        .collect();
    let nu_l2 = basis.nu.l2_norm(grid);
    let rho_constant = (nu_l2 > T::zero())
        .then(|| modes.iter().map(|m| m.rho_norm / nu_l2).fold(T::zero(), T::max));
    let asymptotic_constant = modes.iter().map(|m| m.scaled_deviation).fold(T::zero(), T::max);
    ResidualReport { modes, nu_l2, rho_constant, asymptotic_constant }
}
