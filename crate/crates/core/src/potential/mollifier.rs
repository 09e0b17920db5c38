//! Friedrichs mollifiers and regularisation of potentials and grid data.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::nu::{NuPrimitive, Sampled, SmoothPart};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::quad::GaussLegendre;
use crate::real::{lit, to_f64, Real};

/// Built-in mollifier profiles, each supported in [-1, 1] with unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MollifierProfile {
    /// `C exp(-1/(1-x^2))`, even.
    #[default]
    Standard,
    /// `C (1+x) exp(-1/(1-x^2))`; nonzero first moment, so it converges to
    /// smooth functions only at first order.
    Skewed,
}

fn bump_f64(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// `1 / int_{-1}^{1} exp(-1/(1-x^2)) dx`. The skewed profile shares it since
/// the odd part integrates to zero.
fn normalisation() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let gl = GaussLegendre::<f64>::new(24);
        1.0 / gl.integrate_composite(-1.0, 1.0, 64, bump_f64)
    })
}

impl MollifierProfile {
    pub fn eval<T: Real>(self, x: T) -> T {
        if x.abs() >= T::one() {
            return T::zero();
        }
        let base = lit::<T>(normalisation()) * (-T::one() / (T::one() - x * x)).exp();
        match self {
            MollifierProfile::Standard => base,
            MollifierProfile::Skewed => base * (T::one() + x),
        }
    }

    /// `int_{-1}^{s} psi`.
    pub fn cdf<T: Real>(self, s: T) -> T {
        if s <= -T::one() {
            return T::zero();
        }
        if s >= T::one() {
            return T::one();
        }
        let gl = gl16::<T>();
        gl.integrate_composite(-T::one(), s, 32, |x| self.eval(x))
    }

    pub fn peak<T: Real>(self) -> T {
        self.eval(T::zero())
    }
}

fn gl16<T: Real>() -> GaussLegendre<T> {
    GaussLegendre::new(16)
}

/// Profile together with the scale `epsilon`: `psi_eps(x) = psi(x/eps)/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec<T> {
    #[serde(default)]
    pub profile: MollifierProfile,
    pub epsilon: T,
}

impl<T: Real> MollifierSpec<T> {
    pub fn new(profile: MollifierProfile, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon <= T::one()) {
            return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        Ok(MollifierSpec { profile, epsilon })
    }

    pub fn standard(epsilon: T) -> Result<Self> {
        Self::new(MollifierProfile::Standard, epsilon)
    }

    pub fn kernel(&self, x: T) -> T {
        self.profile.eval(x / self.epsilon) / self.epsilon
    }

    /// `int psi_eps` by composite Gauss–Legendre over its support.
    pub fn mass(&self) -> T {
        let gl = gl16::<T>();
        gl.integrate_composite(-self.epsilon, self.epsilon, 16, |x| self.kernel(x))
    }

    /// Fails unless the grid puts at least eight intervals across [-eps, eps].
    pub fn check_resolved(&self, grid: Grid) -> Result<()> {
        let h = grid.h::<T>();
        if lit::<T>(2.0) * self.epsilon / h < lit::<T>(8.0) - lit(1e-9) {
            return Err(Error::UnresolvedMollifier { epsilon: to_f64(self.epsilon), h: to_f64(h) });
        }
        Ok(())
    }

    /// Sub-intervals of [-1, 1] in the kernel variable `s`, split wherever
    /// `x - eps s` crosses one of `kinks`.
    fn pieces(&self, x: T, kinks: &[T]) -> Vec<(T, T)> {
        let mut cuts = vec![-T::one()];
        for &k in kinks {
            let s = (x - k) / self.epsilon;
            if s > -T::one() && s < T::one() {
                cuts.push(s);
            }
        }
        cuts.push(T::one());
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
        cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
    }
}

/// Zero extension of a grid function to the whole line.
#[derive(Debug, Clone)]
pub struct ZeroExtension<T> {
    inner: GridFunction<T>,
}

impl<T: Real> ZeroExtension<T> {
    pub fn eval(&self, x: T) -> T {
        if x <= T::zero() || x >= T::one() {
            T::zero()
        } else {
            self.inner.eval_linear(x)
        }
    }

    pub fn inner(&self) -> &GridFunction<T> {
        &self.inner
    }
}

pub fn extend_by_zero<T: Real>(f: &GridFunction<T>) -> ZeroExtension<T> {
    ZeroExtension { inner: f.clone() }
}

/// `(f~ * psi_eps)` on the grid of `f`, where `f~` is the zero extension.
pub fn mollify_grid_function<T: Real>(f: &GridFunction<T>, m: &MollifierSpec<T>) -> Result<GridFunction<T>> {
    let grid = f.grid();
    m.check_resolved(grid)?;
    let ext = extend_by_zero(f);
    let gl = gl16::<T>();
    // Kinks of the linear interpolant lie at every node; splitting at the
    // two support ends and using several panels per piece is enough.
    let kinks = [T::zero(), T::one()];
    let values = (0..grid.len())
        .map(|i| {
            let x = grid.x::<T>(i);
            m.pieces(x, &kinks)
                .into_iter()
                .map(|(a, b)| gl.integrate_composite(a, b, 16, |s| m.profile.eval(s) * ext.eval(x - m.epsilon * s)))
                .fold(T::zero(), |acc, v| acc + v)
        })
        .collect();
    GridFunction::new(grid, values)
}

struct MollifiedSamples<T> {
    primitive: Vec<T>,
    potential: Vec<T>,
}

fn mollified_samples<T: Real>(nu: &NuPrimitive<T>, m: &MollifierSpec<T>, grid: Grid) -> Result<MollifiedSamples<T>> {
    m.check_resolved(grid)?;
    let gl = gl16::<T>();
    let smooth = nu.smooth_part();
    let s0 = smooth.value(T::zero());
    let kinks = [T::zero(), T::one()];
    let panels = 16;

    // Primitive of the zero-extended smooth part of q: constant outside (0, 1).
    let g_smooth = |y: T| smooth.value(y.max(T::zero()).min(T::one())) - s0;
    let q_smooth = |y: T| {
        if y > T::zero() && y < T::one() {
            smooth.derivative(y)
        } else {
            T::zero()
        }
    };
    let trivially_zero = matches!(smooth, SmoothPart::Zero | SmoothPart::Constant(_));

    let conv = |x: T| -> (T, T) {
        let (mut g, mut q) = (T::zero(), T::zero());
        if !trivially_zero {
            for (a, b) in m.pieces(x, &kinks) {
                g = g + gl.integrate_composite(a, b, panels, |s| m.profile.eval(s) * g_smooth(x - m.epsilon * s));
                q = q + gl.integrate_composite(a, b, panels, |s| m.profile.eval(s) * q_smooth(x - m.epsilon * s));
            }
        }
        for j in nu.jumps() {
            let s = (x - j.location) / m.epsilon;
            g = g + j.height * m.profile.cdf(s);
            q = q + j.height * m.profile.eval(s) / m.epsilon;
        }
        (g, q)
    };

    let samples: Vec<(T, T)> = (0..grid.len()).map(|i| conv(grid.x(i))).collect();
    let anchor = samples[0].0;
    let nu0 = nu.evaluate(T::zero());
    Ok(MollifiedSamples {
        primitive: samples.iter().map(|&(g, _)| g - anchor + nu0).collect(),
        potential: samples.iter().map(|&(_, q)| q).collect(),
    })
}

/// `q_eps = q~ * psi_eps` sampled on the grid. Atoms are mollified exactly
/// (`delta_{x_i} * psi_eps = psi_eps(. - x_i)`); the smooth part by quadrature.
pub fn mollify_potential<T: Real>(nu: &NuPrimitive<T>, m: &MollifierSpec<T>, grid: Grid) -> Result<GridFunction<T>> {
    let s = mollified_samples(nu, m, grid)?;
    GridFunction::new(grid, s.potential)
}

/// Primitive of `q_eps` as a Hermite-sampled `nu` on the grid nodes, with the
/// exact mollified potential as node slopes. This is what the phase
/// integrator consumes for regularised problems.
pub fn mollified_primitive<T: Real>(nu: &NuPrimitive<T>, m: &MollifierSpec<T>, grid: Grid) -> Result<NuPrimitive<T>> {
    let s = mollified_samples(nu, m, grid)?;
    NuPrimitive::new(SmoothPart::Sampled(Sampled::with_slopes(s.primitive, s.potential)?), vec![])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_has_unit_mass() {
        for p in [MollifierProfile::Standard, MollifierProfile::Skewed] {
            for eps in [1.0, 0.1, 2f64.powi(-9)] {
                let m = MollifierSpec::new(p, eps).unwrap();
                assert!((m.mass() - 1.0).abs() < 1e-12, "{p:?} eps={eps}");
            }
        }
    }

    #[test]
    fn cdf_limits_and_midpoint() {
        let p = MollifierProfile::Standard;
        assert_eq!(p.cdf(-1.0_f64), 0.0);
        assert_eq!(p.cdf(1.0_f64), 1.0);
        assert!((p.cdf(0.0_f64) - 0.5).abs() < 1e-14);
        assert!((p.cdf(0.999_f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_is_epsilon_ball() {
        let m = MollifierSpec::standard(0.1_f64).unwrap();
        assert_eq!(m.kernel(0.1), 0.0);
        assert_eq!(m.kernel(-0.1000001), 0.0);
        assert!(m.kernel(0.09) > 0.0);
    }

    #[test]
    fn zero_extension_examples() {
        let g = Grid::new(64).unwrap();
        let one = GridFunction::<f64>::from_fn(g, |_| 1.0);
        let ext = extend_by_zero(&one);
        assert_eq!(ext.eval(1.5), 0.0);
        assert_eq!(ext.eval(0.5), 1.0);
        let s = GridFunction::<f64>::from_fn(g, |x| (std::f64::consts::PI * x).sin());
        assert_eq!(extend_by_zero(&s).eval(-0.2), 0.0);
    }

    #[test]
    fn unresolved_epsilon_is_rejected() {
        let g = Grid::new(64).unwrap();
        let m = MollifierSpec::standard(0.05_f64).unwrap();
        assert!(matches!(
            mollify_potential(&NuPrimitive::zero(), &m, g),
            Err(Error::UnresolvedMollifier { .. })
        ));
    }

    #[test]
    fn delta_peak_scales_like_inverse_epsilon() {
        let g = Grid::new(2048).unwrap();
        let nu = NuPrimitive::delta(0.5_f64, 1.0).unwrap();
        for k in 2..=9 {
            let eps = 2f64.powi(-k);
            let q = mollify_potential(&nu, &MollifierSpec::standard(eps).unwrap(), g).unwrap();
            let peak = MollifierProfile::Standard.peak::<f64>();
            assert!((q.linf_norm() * eps - peak).abs() < 1e-12, "eps = {eps}");
        }
    }

    #[test]
    fn mollified_zero_is_zero() {
        let g = Grid::new(128).unwrap();
        let q = mollify_potential(&NuPrimitive::<f64>::zero(), &MollifierSpec::standard(0.1).unwrap(), g).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_potential_is_reproduced_in_the_interior() {
        // Oracle: direct quadrature of the convolution integral against the
        // kernel in physical variables, independent of the s-substitution.
        let g = Grid::new(1024).unwrap();
        let eps = 0.01;
        let m = MollifierSpec::standard(eps).unwrap();
        let nu = NuPrimitive::smooth(SmoothPart::Linear(5.0_f64));
        let q = mollify_potential(&nu, &m, g).unwrap();
        let gl = GaussLegendre::<f64>::new(20);
        for i in 0..g.len() {
            let x: f64 = g.x(i);
            if x < 2.0 * eps || x > 1.0 - 2.0 * eps {
                continue;
            }
            let direct = gl.integrate_composite(x - eps, x + eps, 32, |y| 5.0 * m.kernel(x - y));
            assert!((direct - 5.0).abs() <= 1e-10);
            assert!((q.values()[i] - 5.0).abs() <= 1e-10, "x = {x}");
        }
    }

    #[test]
    fn atom_mass_is_conserved() {
        let g = Grid::new(2048).unwrap();
        let nu = NuPrimitive::new(
            SmoothPart::Zero,
            vec![
                super::super::nu::Jump { location: 0.3, height: 2.0 },
                super::super::nu::Jump { location: 0.5, height: -0.5 },
            ],
        )
        .unwrap();
        let m = MollifierSpec::standard(2f64.powi(-4)).unwrap();
        let q = mollify_potential(&nu, &m, g).unwrap();
        assert!((q.integral() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn even_potential_stays_even() {
        let g = Grid::new(1024).unwrap();
        let nu = NuPrimitive::delta(0.5_f64, 3.0).unwrap();
        let q = mollify_potential(&nu, &MollifierSpec::standard(0.05).unwrap(), g).unwrap();
        let v = q.values();
        for i in 0..g.len() {
            assert!((v[i] - v[g.intervals() - i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn mollified_primitive_differentiates_to_potential() {
        let g = Grid::new(1024).unwrap();
        let nu = NuPrimitive::new(
            SmoothPart::Cosine { amplitude: -1.0 / (2.0 * std::f64::consts::PI), mode: 1 },
            vec![super::super::nu::Jump { location: 0.5, height: 1.0 }],
        )
        .unwrap();
        let m = MollifierSpec::standard(0.05).unwrap();
        let nu_eps = mollified_primitive(&nu, &m, g).unwrap();
        let q = mollify_potential(&nu, &m, g).unwrap();
        let h = g.h::<f64>();
        for i in 2..g.intervals() - 1 {
            let x: f64 = g.x(i);
            let e = |d: f64| nu_eps.evaluate(x + d * h);
            let fd = (-e(2.0) + 8.0 * e(1.0) - 8.0 * e(-1.0) + e(-2.0)) / (12.0 * h);
            assert!((fd - q.values()[i]).abs() < 1e-3 * (1.0 + q.values()[i].abs()), "x = {x}");
        }
        // Far from the jump and the boundary layers the regularised primitive
        // agrees with nu itself up to the anchoring constant.
        let offset = nu_eps.evaluate(0.25) - nu.evaluate(0.25);
        assert!((nu_eps.evaluate(0.75) - nu.evaluate(0.75) - offset).abs() < 1e-8);
    }
}
