//! The primitive `nu` of a distributional potential `q = nu'`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::real::{lit, Real};

/// Smooth part of `nu`, drawn from a fixed catalog.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPart<T> {
    Zero,
    /// `nu = c`, so it contributes nothing to `q`.
    Constant(T),
    /// `nu = c x`, i.e. `q = c`.
    Linear(T),
    /// `nu = a sin(2 pi m x)`.
    Sine { amplitude: T, mode: u32 },
    /// `nu = a cos(2 pi m x)`.
    Cosine { amplitude: T, mode: u32 },
    /// Uniform samples over [0, 1] joined by cubic Hermite pieces.
    Sampled(Sampled<T>),
}

/// Cubic Hermite interpolant through uniform samples. Slopes are either given
/// (they are then the sampled potential itself) or estimated by second-order
/// finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<T> {
    values: Vec<T>,
    slopes: Vec<T>,
    explicit_slopes: bool,
}

impl<T: Real> Sampled<T> {
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("sampled nu needs at least two samples".into()));
        }
        let k = values.len() - 1;
        let inv_h = lit::<T>(k as f64);
        let two = lit::<T>(2.0);
        let slopes = (0..=k)
            .map(|i| {
                if k == 1 {
                    (values[1] - values[0]) * inv_h
                } else if i == 0 {
                    (-lit::<T>(3.0) * values[0] + lit::<T>(4.0) * values[1] - values[2]) * inv_h / two
                } else if i == k {
                    (lit::<T>(3.0) * values[k] - lit::<T>(4.0) * values[k - 1] + values[k - 2]) * inv_h / two
                } else {
                    (values[i + 1] - values[i - 1]) * inv_h / two
                }
            })
            .collect();
        Ok(Sampled { values, slopes, explicit_slopes: false })
    }

    pub fn with_slopes(values: Vec<T>, slopes: Vec<T>) -> Result<Self> {
        if values.len() < 2 || values.len() != slopes.len() {
            return Err(Error::InvalidInput("sampled nu needs matching value/slope arrays of length >= 2".into()));
        }
        Ok(Sampled { values, slopes, explicit_slopes: true })
    }

    pub fn knots(&self) -> usize {
        self.values.len()
    }

    fn piece(&self, x: T) -> (usize, T, T) {
        let k = self.values.len() - 1;
        let s = x.max(T::zero()).min(T::one()) * lit(k as f64);
        let i = s.floor().to_usize().unwrap_or(0).min(k - 1);
        (i, s - lit(i as f64), T::one() / lit(k as f64))
    }

    fn value(&self, x: T) -> T {
        let (i, t, h) = self.piece(x);
        let (t2, t3) = (t * t, t * t * t);
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1]
    }

    fn derivative(&self, x: T) -> T {
        let (i, t, h) = self.piece(x);
        let t2 = t * t;
        let six = lit::<T>(6.0);
        let d00 = six * t2 - six * t;
        let d10 = lit::<T>(3.0) * t2 - lit::<T>(4.0) * t + T::one();
        let d01 = -d00;
        let d11 = lit::<T>(3.0) * t2 - lit::<T>(2.0) * t;
        (d00 * self.values[i] + d01 * self.values[i + 1]) / h + d10 * self.slopes[i] + d11 * self.slopes[i + 1]
    }
}

impl<T: Real> SmoothPart<T> {
    pub fn value(&self, x: T) -> T {
        let two_pi = T::PI() + T::PI();
        match self {
            SmoothPart::Zero => T::zero(),
            SmoothPart::Constant(c) => *c,
            SmoothPart::Linear(c) => *c * x,
            SmoothPart::Sine { amplitude, mode } => *amplitude * (two_pi * lit(*mode as f64) * x).sin(),
            SmoothPart::Cosine { amplitude, mode } => *amplitude * (two_pi * lit(*mode as f64) * x).cos(),
            SmoothPart::Sampled(s) => s.value(x),
        }
    }

    /// Derivative, i.e. the bounded part of the potential.
    pub fn derivative(&self, x: T) -> T {
        let two_pi = T::PI() + T::PI();
        match self {
            SmoothPart::Zero | SmoothPart::Constant(_) => T::zero(),
            SmoothPart::Linear(c) => *c,
            SmoothPart::Sine { amplitude, mode } => {
                let k = two_pi * lit(*mode as f64);
                *amplitude * k * (k * x).cos()
            }
            SmoothPart::Cosine { amplitude, mode } => {
                let k = two_pi * lit(*mode as f64);
                -*amplitude * k * (k * x).sin()
            }
            SmoothPart::Sampled(s) => s.derivative(x),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            SmoothPart::Zero => "zero",
            SmoothPart::Constant(_) => "constant",
            SmoothPart::Linear(_) => "linear",
            SmoothPart::Sine { .. } => "sine",
            SmoothPart::Cosine { .. } => "cosine",
            SmoothPart::Sampled(s) if s.explicit_slopes => "sampled_hermite",
            SmoothPart::Sampled(_) => "sampled",
        }
    }

    fn params(&self) -> Vec<T> {
        match self {
            SmoothPart::Zero => vec![],
            SmoothPart::Constant(c) | SmoothPart::Linear(c) => vec![*c],
            SmoothPart::Sine { amplitude, mode } | SmoothPart::Cosine { amplitude, mode } => {
                vec![*amplitude, lit(*mode as f64)]
            }
            SmoothPart::Sampled(s) if s.explicit_slopes => {
                s.values.iter().chain(&s.slopes).copied().collect()
            }
            SmoothPart::Sampled(s) => s.values.clone(),
        }
    }

    fn from_kind(kind: &str, params: &[T]) -> Result<Self> {
        let arity = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("smooth kind '{kind}' takes {n} params, got {}", params.len())))
            }
        };
        let mode = |v: T| -> Result<u32> {
            let m = v.round();
            if (v - m).abs() > lit(1e-12) || m < T::one() {
                return Err(Error::InvalidInput(format!("mode must be a positive integer, got {v}")));
            }
            Ok(m.to_u32().unwrap_or(1))
        };
        Ok(match kind {
            "zero" => {
                arity(0)?;
                SmoothPart::Zero
            }
            "constant" => {
                arity(1)?;
                SmoothPart::Constant(params[0])
            }
            "linear" => {
                arity(1)?;
                SmoothPart::Linear(params[0])
            }
            "sine" => {
                arity(2)?;
                SmoothPart::Sine { amplitude: params[0], mode: mode(params[1])? }
            }
            "cosine" => {
                arity(2)?;
                SmoothPart::Cosine { amplitude: params[0], mode: mode(params[1])? }
            }
            "sampled" => SmoothPart::Sampled(Sampled::from_values(params.to_vec())?),
            "sampled_hermite" => {
                if params.len() % 2 != 0 {
                    return Err(Error::InvalidInput("sampled_hermite needs values followed by slopes".into()));
                }
                let (v, s) = params.split_at(params.len() / 2);
                SmoothPart::Sampled(Sampled::with_slopes(v.to_vec(), s.to_vec())?)
            }
            other => return Err(Error::InvalidInput(format!("unknown smooth kind '{other}'"))),
        })
    }
}

/// Heaviside atom `height * H(x - location)` in `nu`, i.e. `height * delta`
/// at `location` in the potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump<T> {
    pub location: T,
    pub height: T,
}

/// Primitive of the potential: `nu = smooth + sum_i height_i * H(x - x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuPrimitive<T> {
    smooth: SmoothPart<T>,
    jumps: Vec<Jump<T>>,
    /// `panel_offset[k]` is the sum of the first `k` jump heights.
    panel_offset: Vec<T>,
}

impl<T: Real> NuPrimitive<T> {
    pub fn new(smooth: SmoothPart<T>, jumps: Vec<Jump<T>>) -> Result<Self> {
        for (i, j) in jumps.iter().enumerate() {
            if !(j.location > T::zero() && j.location < T::one()) {
                return Err(Error::InvalidInput(format!("jump location {} outside (0, 1)", j.location)));
            }
            if !j.height.is_finite() {
                return Err(Error::InvalidInput("jump height must be finite".into()));
            }
            if i > 0 && !(j.location > jumps[i - 1].location) {
                return Err(Error::InvalidInput("jump locations must be strictly increasing".into()));
            }
        }
        let mut panel_offset = Vec::with_capacity(jumps.len() + 1);
        let mut acc = T::zero();
        panel_offset.push(acc);
        for j in &jumps {
            acc = acc + j.height;
            panel_offset.push(acc);
        }
        Ok(NuPrimitive { smooth, jumps, panel_offset })
    }

    pub fn zero() -> Self {
        Self::smooth(SmoothPart::Zero)
    }

    pub fn smooth(smooth: SmoothPart<T>) -> Self {
        NuPrimitive { smooth, jumps: vec![], panel_offset: vec![T::zero()] }
    }

    /// `nu = alpha * H(x - x0)`, the primitive of `alpha * delta_{x0}`.
    pub fn delta(x0: T, alpha: T) -> Result<Self> {
        Self::new(SmoothPart::Zero, vec![Jump { location: x0, height: alpha }])
    }

    pub fn smooth_part(&self) -> &SmoothPart<T> {
        &self.smooth
    }

    pub fn jumps(&self) -> &[Jump<T>] {
        &self.jumps
    }

    pub fn has_atoms(&self) -> bool {
        self.jumps.iter().any(|j| j.height != T::zero())
    }

    /// Value at `x` with the left-limit convention at jumps.
    pub fn evaluate(&self, x: T) -> T {
        let mut v = self.smooth.value(x);
        for j in &self.jumps {
            if j.location < x {
                v = v + j.height;
            }
        }
        v
    }

    /// Right limit at `x`.
    pub fn evaluate_right(&self, x: T) -> T {
        let mut v = self.smooth.value(x);
        for j in &self.jumps {
            if j.location <= x {
                v = v + j.height;
            }
        }
        v
    }

    /// Number of jumps strictly left of `x`; identifies the smooth panel.
    pub fn panel_of(&self, x: T) -> usize {
        self.jumps.iter().take_while(|j| j.location < x).count()
    }

    /// Value on panel `k`, i.e. between jump `k-1` and jump `k`.
    #[inline]
    pub fn evaluate_on_panel(&self, x: T, panel: usize) -> T {
        self.smooth.value(x) + self.panel_offset[panel]
    }

    /// Bounded part of `q = nu'` at `x` (atoms excluded).
    pub fn potential_smooth(&self, x: T) -> T {
        self.smooth.derivative(x)
    }

    pub fn is_atom(&self, x: T) -> bool {
        self.jumps.iter().any(|j| j.height != T::zero() && (j.location - x).abs() <= lit(1e-12))
    }

    /// Interior points where the integrand of the phase equations is not
    /// smooth: jump locations and interpolation knots.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut pts: Vec<T> = self.jumps.iter().map(|j| j.location).collect();
        if let SmoothPart::Sampled(s) = &self.smooth {
            let k = s.knots() - 1;
            pts.extend((1..k).map(|i| lit::<T>(i as f64) / lit(k as f64)));
        }
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        pts.dedup_by(|a, b| (*a - *b).abs() <= lit(1e-14));
        pts
    }

    /// `nu` sampled on the grid (left limits at jumps).
    pub fn sample(&self, grid: Grid) -> GridFunction<T> {
        GridFunction::from_fn(grid, |x| self.evaluate(x))
    }

    pub fn l2_norm(&self, grid: Grid) -> T {
        self.sample(grid).l2_norm()
    }

    /// Sup norm over grid nodes and both one-sided limits at jumps.
    pub fn linf_norm(&self, grid: Grid) -> T {
        let mut m = self.sample(grid).linf_norm();
        for j in &self.jumps {
            m = m.max(self.evaluate(j.location).abs()).max(self.evaluate_right(j.location).abs());
        }
        m
    }

    /// `sup |q|` over the grid, available only for bounded potentials.
    pub fn potential_linf(&self, grid: Grid) -> Option<T> {
        if self.has_atoms() {
            return None;
        }
        Some(GridFunction::from_fn(grid, |x| self.potential_smooth(x)).linf_norm())
    }

    /// Total mass of `q` on (0, 1): smooth increment plus atom heights.
    pub fn total_mass(&self) -> T {
        self.smooth.value(T::one()) - self.smooth.value(T::zero()) + *self.panel_offset.last().unwrap()
    }

    /// `self + scale * other.smooth`, used to inject smooth perturbations.
    pub fn with_added_smooth(&self, scale: T, other: &SmoothPart<T>, grid: Grid) -> Result<Self> {
        let values: Vec<T> = (0..grid.len())
            .map(|i| {
                let x = grid.x(i);
                self.smooth.value(x) + scale * other.value(x)
            })
            .collect();
        let slopes: Vec<T> = (0..grid.len())
            .map(|i| {
                let x = grid.x(i);
                self.smooth.derivative(x) + scale * other.derivative(x)
            })
            .collect();
        Self::new(SmoothPart::Sampled(Sampled::with_slopes(values, slopes)?), self.jumps.clone())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothJson<T> {
    kind: String,
    #[serde(default = "Vec::new")]
    params: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NuJson<T> {
    smooth: SmoothJson<T>,
    #[serde(default = "Vec::new")]
    jumps: Vec<[T; 2]>,
}

impl<T: Real> Serialize for NuPrimitive<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NuJson {
            smooth: SmoothJson { kind: self.smooth.kind().to_string(), params: self.smooth.params() },
            jumps: self.jumps.iter().map(|j| [j.location, j.height]).collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for NuPrimitive<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = NuJson::<T>::deserialize(d)?;
        let smooth = SmoothPart::from_kind(&raw.smooth.kind, &raw.smooth.params).map_err(serde::de::Error::custom)?;
        let jumps = raw.jumps.iter().map(|&[location, height]| Jump { location, height }).collect();
        NuPrimitive::new(smooth, jumps).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heaviside_left_and_right_of_jump() {
        let nu = NuPrimitive::<f64>::delta(0.5, 1.0).unwrap();
        assert_eq!(nu.evaluate(0.25), 0.0);
        assert_eq!(nu.evaluate(0.75), 1.0);
        assert_eq!(nu.evaluate(0.5), 0.0);
        assert_eq!(nu.evaluate_right(0.5), 1.0);
    }

    #[test]
    fn linear_plus_jump() {
        let nu = NuPrimitive::new(SmoothPart::Linear(2.0_f64), vec![Jump { location: 0.3, height: 3.0 }]).unwrap();
        assert!((nu.evaluate(0.5) - 4.0).abs() < 1e-15);
        assert!((nu.total_mass() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_jumps() {
        let bad = |locs: &[f64]| {
            let jumps = locs.iter().map(|&x| Jump { location: x, height: 1.0 }).collect();
            NuPrimitive::new(SmoothPart::Zero, jumps).is_err()
        };
        assert!(bad(&[0.0]));
        assert!(bad(&[1.0]));
        assert!(bad(&[0.6, 0.4]));
        assert!(bad(&[0.4, 0.4]));
        assert!(!bad(&[0.2, 0.7]));
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"smooth": {"kind": "sine", "params": [0.5, 2]}, "jumps": [[0.25, 1.5], [0.5, -1.0]]}"#;
        let nu: NuPrimitive<f64> = serde_json::from_str(text).unwrap();
        assert_eq!(nu.jumps().len(), 2);
        let back: NuPrimitive<f64> = serde_json::from_str(&serde_json::to_string(&nu).unwrap()).unwrap();
        assert_eq!(nu, back);
        assert!(serde_json::from_str::<NuPrimitive<f64>>(r#"{"smooth": {"kind": "wat"}}"#).is_err());
        assert!(serde_json::from_str::<NuPrimitive<f64>>(r#"{"smooth": {"kind": "zero"}, "extra": 1}"#).is_err());
    }

    #[test]
    fn hermite_interpolant_is_exact_for_cubics() {
        let k = 8;
        let f = |x: f64| x * x * x - 2.0 * x;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let xs: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        let s = Sampled::with_slopes(xs.iter().map(|&x| f(x)).collect(), xs.iter().map(|&x| df(x)).collect()).unwrap();
        for &x in &[0.03, 0.31, 0.5, 0.99] {
            assert!((s.value(x) - f(x)).abs() < 1e-14);
            assert!((s.derivative(x) - df(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_breakpoints_are_interior_knots() {
        let nu = NuPrimitive::smooth(SmoothPart::Sampled(Sampled::from_values(vec![0.0, 1.0, 0.0, 1.0, 0.0]).unwrap()));
        assert_eq!(nu.breakpoints(), vec![0.25, 0.5, 0.75]);
    }
}
