//! Uniform grids on [0, 1], sampled functions and composite Simpson quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{compensated_sum, lit, Real};

/// Uniform grid on [0, 1] with an even number of intervals so that the
/// composite Simpson rule applies to every sampled function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Grid {
    intervals: usize,
}

impl TryFrom<usize> for Grid {
    type Error = Error;

    fn try_from(intervals: usize) -> Result<Self> {
        Grid::new(intervals)
    }
}

impl From<Grid> for usize {
    fn from(g: Grid) -> usize {
        g.intervals
    }
}

impl Grid {
    pub fn new(intervals: usize) -> Result<Self> {
        if intervals < 2 || intervals % 2 != 0 {
            return Err(Error::InvalidGrid { intervals });
        }
        Ok(Grid { intervals })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Number of nodes, `intervals + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h<T: Real>(&self) -> T {
        T::one() / lit::<T>(self.intervals as f64)
    }

    pub fn x<T: Real>(&self, i: usize) -> T {
        lit::<T>(i as f64) / lit::<T>(self.intervals as f64)
    }

    pub fn nodes<T: Real>(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Index of the node at `x`, if `x` is a node up to rounding.
    pub fn node_index<T: Real>(&self, x: T) -> Option<usize> {
        let s = x * lit::<T>(self.intervals as f64);
        let r = s.round();
        if (s - r).abs() <= lit::<T>(1e-9) && r >= T::zero() && r <= lit(self.intervals as f64) {
            r.to_usize()
        } else {
            None
        }
    }

    /// Composite Simpson rule over [0, 1].
    pub fn simpson<T: Real>(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        let n = self.intervals;
        let weighted = values.iter().enumerate().map(|(i, &v)| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            v * lit(w)
        });
        compensated_sum(weighted) * self.h::<T>() / lit(3.0)
    }
}

/// Real function sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction { grid, values: vec![T::zero(); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(T) -> T) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.x(i))).collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn ensure_same_grid(&self, other: &GridFunction<T>) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn integral(&self) -> T {
        self.grid.simpson(&self.values)
    }

    pub fn inner(&self, other: &GridFunction<T>) -> Result<T> {
        self.ensure_same_grid(other)?;
        let prod: Vec<T> = self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).collect();
        Ok(self.grid.simpson(&prod))
    }

    pub fn l2_norm_sq(&self) -> T {
        let sq: Vec<T> = self.values.iter().map(|&v| v * v).collect();
        self.grid.simpson(&sq)
    }

    pub fn l2_norm(&self) -> T {
        self.l2_norm_sq().max(T::zero()).sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GridFunction { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scaled(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: T, other: &GridFunction<T>, b: T) -> Result<Self> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&u, &v)| a * u + b * v).collect();
        Ok(GridFunction { grid: self.grid, values })
    }

    pub fn sub(&self, other: &GridFunction<T>) -> Result<Self> {
        self.combine(T::one(), other, -T::one())
    }

    /// Piecewise-linear interpolation; `x` is clamped to [0, 1].
    pub fn eval_linear(&self, x: T) -> T {
        let n = self.grid.intervals;
        let s = (x.max(T::zero()).min(T::one())) * lit(n as f64);
        let i = s.floor().to_usize().unwrap_or(0).min(n - 1);
        let frac = s - lit(i as f64);
        self.values[i] * (T::one() - frac) + self.values[i + 1] * frac
    }

    /// Second derivative by finite differences: centred in the interior and
    /// second-order one-sided at the end points.
    pub fn second_derivative(&self) -> Self {
        let n = self.grid.intervals;
        let h2 = self.grid.h::<T>().powi(2);
        let v = &self.values;
        let mut out = vec![T::zero(); n + 1];
        for i in 1..n {
            out[i] = (v[i - 1] - lit::<T>(2.0) * v[i] + v[i + 1]) / h2;
        }
        if n >= 4 {
            out[0] = (lit::<T>(2.0) * v[0] - lit::<T>(5.0) * v[1] + lit::<T>(4.0) * v[2] - v[3]) / h2;
            out[n] = (lit::<T>(2.0) * v[n] - lit::<T>(5.0) * v[n - 1] + lit::<T>(4.0) * v[n - 2]
                - v[n - 3])
                / h2;
        } else {
            out[0] = out[1];
            out[n] = out[n - 1];
        }
        GridFunction { grid: self.grid, values: out }
    }
}

/// Uniform time grid `t_j = j * dt`, `j = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub horizon: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || steps == 0 {
            return Err(Error::InvalidInput("time grid needs T > 0 and at least one step".into()));
        }
        Ok(TimeGrid { horizon, steps })
    }

    /// Grid with `dt = min(T/200, 0.25/sqrt(lambda_max))`.
    pub fn for_spectrum(horizon: T, lambda_max: T) -> Result<Self> {
        let dt = (horizon / lit(200.0)).min(lit::<T>(0.25) / lambda_max.max(T::one()).sqrt());
        let steps = (horizon / dt).ceil().to_usize().unwrap_or(1).max(1);
        Self::new(horizon, steps)
    }

    pub fn dt(&self) -> T {
        self.horizon / lit(self.steps as f64)
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t(&self, j: usize) -> T {
        self.horizon * lit(j as f64) / lit(self.steps as f64)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.t(j)).collect()
    }
}

/// Running integral of samples on a uniform grid, built from the local
/// quadratic interpolant (composite Simpson at even nodes).
#[derive(Debug, Clone)]
pub struct CumulativeIntegral<T> {
    dt: T,
    samples: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> CumulativeIntegral<T> {
    pub fn new(dt: T, samples: Vec<T>) -> Self {
        let n = samples.len();
        let mut cumulative = vec![T::zero(); n];
        let twelve = lit::<T>(12.0);
        for j in 1..n {
            cumulative[j] = if n < 3 {
                cumulative[j - 1] + dt * (samples[j - 1] + samples[j]) / lit(2.0)
            } else if j % 2 == 0 {
                cumulative[j - 2]
                    + dt / lit(3.0) * (samples[j - 2] + lit::<T>(4.0) * samples[j - 1] + samples[j])
            } else if j + 1 < n {
                cumulative[j - 1]
                    + dt / twelve
                        * (lit::<T>(5.0) * samples[j - 1] + lit::<T>(8.0) * samples[j] - samples[j + 1])
            } else {
                cumulative[j - 1]
                    + dt / twelve
                        * (-samples[j - 2] + lit::<T>(8.0) * samples[j - 1] + lit::<T>(5.0) * samples[j])
            };
        }
        CumulativeIntegral { dt, samples, cumulative }
    }

    pub fn at_node(&self, j: usize) -> T {
        self.cumulative[j]
    }

    /// Integral from 0 to `t`, for `t` within the sampled range.
    pub fn at(&self, t: T) -> T {
        let n = self.samples.len();
        let s = (t / self.dt).max(T::zero());
        let r = s.round();
        if (s - r).abs() <= lit(1e-10) {
            return self.cumulative[r.to_usize().unwrap_or(0).min(n - 1)];
        }
        if n < 3 {
            let j = 0;
            let frac = s.min(T::one());
            let a = self.samples[j];
            let b = self.samples[(j + 1).min(n - 1)];
            return self.dt * (a * frac + (b - a) * frac * frac / lit(2.0));
        }
        let j = s.floor().to_usize().unwrap_or(0).min(n - 2);
        let u = s - lit(j as f64);
        let base = if j + 2 < n { j } else { j - 1 };
        let (f0, f1, f2) = (self.samples[base], self.samples[base + 1], self.samples[base + 2]);
        // Antiderivative of the quadratic through (0,f0),(1,f1),(2,f2) in local units.
        let prim = |v: T| -> T {
            let two = lit::<T>(2.0);
            let l0 = (v * v * v / lit(3.0) - lit::<T>(1.5) * v * v + two * v) / two;
            let l1 = -(v * v * v / lit(3.0) - v * v);
            let l2 = (v * v * v / lit(3.0) - v * v / two) / two;
            f0 * l0 + f1 * l1 + f2 * l2
        };
        let offset = lit::<T>((j - base) as f64);
        self.cumulative[j] + self.dt * (prim(offset + u) - prim(offset))
    }
}
