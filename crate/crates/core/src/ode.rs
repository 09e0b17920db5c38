//! Adaptive Dormand–Prince 5(4) stepping over fixed segments.
//!
//! Callers split the domain at points where the right-hand side is not
//! smooth (jumps of the potential primitive, interpolation knots, output
//! nodes) and integrate segment by segment, carrying the step size across.

use crate::error::{Error, Result};
use crate::real::{lit, to_f64, Real};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<T> {
    pub atol: T,
    pub rtol: T,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone)]
pub struct DormandPrince<T> {
    tol: Tolerance<T>,
    max_steps_per_segment: usize,
    pub stats: StepStats,
}

impl<T: Real> DormandPrince<T> {
    pub fn new(tol: Tolerance<T>) -> Self {
        DormandPrince { tol, max_steps_per_segment: 1_000_000, stats: StepStats::default() }
    }

    /// Integrates `y' = f(x, y)` from `a` to `b`, landing exactly on `b`.
    /// `h` is the step-size guess on entry and the suggestion for the next
    /// segment on exit.
    pub fn segment<const N: usize, F>(&mut self, f: &F, a: T, b: T, y: &mut [T; N], h: &mut T) -> Result<()>
    where
        F: Fn(T, &[T; N]) -> [T; N],
    {
        let span = b - a;
        if span <= T::zero() {
            return Ok(());
        }
        let tiny = span * lit(1e-14);
        let mut x = a;
        if !(*h > T::zero()) || *h > span {
            *h = span;
        }
        let mut k1 = f(x, y);
        let mut steps = 0usize;
        loop {
            let remaining = b - x;
            if remaining <= tiny {
                return Ok(());
            }
            let last = *h >= remaining;
            let step = if last { remaining } else { *h };
            let (y_new, k7, err) = self.trial(f, x, y, &k1, step);
            steps += 1;
            if steps > self.max_steps_per_segment || step < span * lit(1e-13) && err > T::one() {
                return Err(Error::StepFailure { x: to_f64(x), h: to_f64(step) });
            }
            let factor = if err == T::zero() {
                lit(5.0)
            } else {
                (lit::<T>(0.9) * err.powf(lit(-0.2))).max(lit(0.2)).min(lit(5.0))
            };
            if err <= T::one() {
                self.stats.accepted += 1;
                x = if last { b } else { x + step };
                *y = y_new;
                k1 = k7;
                let proposal = step * factor;
                // A short closing step must not shrink the carried step size.
                *h = if last { proposal.max(*h) } else { proposal };
                if last {
                    return Ok(());
                }
            } else {
                self.stats.rejected += 1;
                *h = step * factor.min(lit(0.9));
            }
        }
    }

    fn trial<const N: usize, F>(&self, f: &F, x: T, y: &[T; N], k1: &[T; N], h: T) -> ([T; N], [T; N], T)
    where
        F: Fn(T, &[T; N]) -> [T; N],
    {
        let c = |v: f64| lit::<T>(v);
        let stage = |coeffs: &[(f64, &[T; N])]| -> [T; N] {
            let mut out = *y;
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (a, k) in coeffs {
                    acc = acc + c(*a) * k[i];
                }
                *o = *o + h * acc;
            }
            out
        };
        let k2 = f(x + h * c(C2), &stage(&[(A21, k1)]));
        let k3 = f(x + h * c(C3), &stage(&[(A31, k1), (A32, &k2)]));
        let k4 = f(x + h * c(C4), &stage(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(x + h * c(C5), &stage(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(x + h, &stage(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = stage(&[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(x + h, &y_new);
        let mut err = T::zero();
        for i in 0..N {
            let e = h
                * (c(E1) * k1[i] + c(E3) * k3[i] + c(E4) * k4[i] + c(E5) * k5[i] + c(E6) * k6[i]
                    + c(E7) * k7[i]);
            let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        (y_new, k7, err)
    }
}
