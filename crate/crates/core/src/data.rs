//! Catalog of initial data and forcing profiles, and seeded random batteries.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::real::{lit, to_f64, Real};

/// A function on `[0, 1]` named by `kind` with numeric `params`.
///
/// | kind         | params              | value                          |
/// |--------------|---------------------|--------------------------------|
/// | `zero`       |                     | 0                              |
/// | `sine`       | `a, m`              | `a sin(m pi x)`                |
/// | `parabola`   | `a`                 | `a x (1 - x)`                  |
/// | `power_bump` | `a, p`              | `a (x (1 - x))^p`              |
/// | `sine_sum`   | `c_1, ..., c_k`     | `sum c_m sin(m pi x)`          |
/// | `samples`    | `v_0, ..., v_k`     | piecewise linear through nodes |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl DataSpec {
    pub fn new(kind: &str, params: Vec<f64>) -> Self {
        DataSpec { kind: kind.to_string(), params }
    }

    pub fn zero() -> Self {
        Self::new("zero", vec![])
    }

    fn arity(&self, n: usize) -> Result<()> {
        if self.params.len() != n {
            return Err(Error::InvalidInput(format!(
                "data kind '{}' takes {n} params, got {}",
                self.kind,
                self.params.len()
            )));
        }
        Ok(())
    }

    /// Checks kind and arity without sampling.
    pub fn validate(&self) -> Result<()> {
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite parameter in '{}'", self.kind)));
        }
        match self.kind.as_str() {
            "zero" => self.arity(0),
            "sine" | "power_bump" => self.arity(2),
            "parabola" => self.arity(1),
            "sine_sum" => Ok(()),
            "samples" if self.params.len() >= 2 => Ok(()),
            "samples" => Err(Error::InvalidInput("samples needs at least two values".into())),
            other => Err(Error::InvalidInput(format!("unknown data kind '{other}'"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.kind.as_str() {
            "sine" => p[0] * (p[1] * PI * x).sin(),
            "parabola" => p[0] * x * (1.0 - x),
            "power_bump" => p[0] * (x * (1.0 - x)).max(0.0).powf(p[1]),
            "sine_sum" => p.iter().enumerate().map(|(m, c)| c * ((m + 1) as f64 * PI * x).sin()).sum(),
            "samples" => {
                let k = p.len() - 1;
                let s = (x.clamp(0.0, 1.0) * k as f64).min(k as f64);
                let i = (s.floor() as usize).min(k - 1);
                let w = s - i as f64;
                p[i] * (1.0 - w) + p[i + 1] * w
            }
            _ => 0.0,
        }
    }

    pub fn sample<T: Real>(&self, grid: Grid) -> Result<GridFunction<T>> {
        self.validate()?;
        Ok(GridFunction::from_fn(grid, |x: T| lit(self.eval(to_f64(x)))))
    }
}

/// Time profile `g(t)` of a separable source `f(t, x) = g(t) h(x)`.
///
/// Kinds: `constant [c]`, `linear [a, b]` for `a + b t`, `sine [a, w]` and
/// `cosine [a, w]` for `a sin(w t)` and `a cos(w t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeProfile {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl TimeProfile {
    pub fn constant(c: f64) -> Self {
        TimeProfile { kind: "constant".into(), params: vec![c] }
    }

    pub fn validate(&self) -> Result<()> {
        let want = match self.kind.as_str() {
            "constant" => 1,
            "linear" | "sine" | "cosine" => 2,
            other => return Err(Error::InvalidInput(format!("unknown time profile '{other}'"))),
        };
        if self.params.len() != want || self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("time profile '{}' takes {want} finite params", self.kind)));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.params;
        match self.kind.as_str() {
            "constant" => p[0],
            "linear" => p[0] + p[1] * t,
            "sine" => p[0] * (p[1] * t).sin(),
            "cosine" => p[0] * (p[1] * t).cos(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    pub space: DataSpec,
    pub time: TimeProfile,
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        self.time.validate()
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.time.eval(t) * self.space.eval(x)
    }
}

/// Seeded smooth sine series with coefficients decaying like `m^-2`.
pub fn random_sine_sum(rng: &mut ChaCha8Rng, terms: usize) -> DataSpec {
    let params = (1..=terms).map(|m| rng.gen_range(-1.0..1.0) / (m * m) as f64).collect();
    DataSpec::new("sine_sum", params)
}

/// `count` pairs `(u0, u1)` of smooth random data vanishing at both ends.
pub fn random_smooth_specs(seed: u64, count: usize) -> Vec<(DataSpec, DataSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (random_sine_sum(&mut rng, 8), random_sine_sum(&mut rng, 8))).collect()
}

pub fn random_smooth_battery<T: Real>(seed: u64, count: usize, grid: Grid) -> Vec<(GridFunction<T>, GridFunction<T>)> {
    random_smooth_specs(seed, count)
        .into_iter()
        .map(|(a, b)| (a.sample(grid).expect("catalog kind"), b.sample(grid).expect("catalog kind")))
        .collect()
}
