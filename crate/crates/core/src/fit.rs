//! Least-squares line fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::real::{compensated_sum, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Largest absolute vertical distance from a point to the fitted line.
    pub max_deviation: T,
}

/// Ordinary least-squares fit of `ys` against `xs`. Needs two distinct `xs`.
pub fn fit_line<T: Real>(xs: &[T], ys: &[T]) -> Option<LineFit<T>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = lit::<T>(xs.len() as f64);
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxx = compensated_sum(xs.iter().map(|&x| (x - mx) * (x - mx)));
    if sxx <= T::zero() {
        return None;
    }
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_deviation = xs
        .iter()
        .zip(ys)
        .fold(T::zero(), |m, (&x, &y)| m.max((y - intercept - slope * x).abs()));
    Some(LineFit { slope, intercept, max_deviation })
}

/// Slope of `log(values)` against `log(epsilons)`; `None` if any value is not
/// strictly positive.
pub fn log_log_slope<T: Real>(epsilons: &[T], values: &[T]) -> Option<LineFit<T>> {
    if values.iter().any(|&v| !(v > T::zero())) {
        return None;
    }
    let lx: Vec<T> = epsilons.iter().map(|e| e.ln()).collect();
    let ly: Vec<T> = values.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}
