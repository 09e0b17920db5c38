//! Both sides of the a-priori energy estimates for the homogeneous and the
//! forced wave equation, evaluated on computed solutions.
//!
//! Every right-hand side is assembled from squared norms of the data, of
//! `nu` and `q`, and of the source. `lhs_max` is the maximum of the squared
//! left-hand norm over the stored times.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{log_log_slope, LineFit};
use crate::grid::GridFunction;
use crate::real::{lit, to_f64, Real};
use crate::wave::{spatial_derivatives, WaveProblem, WaveSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimateId {
    Est1,
    Est2,
    Est3,
    Est4,
    Est5,
    Ec1,
    Ec2,
    Ec3,
    Ec4,
    Esnh1,
    Esnh2,
    Esnh3,
    Esnh4,
    Ecnh1,
    Ecnh2,
    Ecnh3,
    Ecnh4,
}

use EstimateId::*;

impl EstimateId {
    pub const ALL: [EstimateId; 17] =
        [Est1, Est2, Est3, Est4, Est5, Ec1, Ec2, Ec3, Ec4, Esnh1, Esnh2, Esnh3, Esnh4, Ecnh1, Ecnh2, Ecnh3, Ecnh4];

    /// The thirteen homogeneous, data-regularity and forced estimates.
    pub fn core_suite() -> &'static [EstimateId] {
        &Self::ALL[..13]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Est1 => "est1",
            Est2 => "est2",
            Est3 => "est3",
            Est4 => "est4",
            Est5 => "est5",
            Ec1 => "ec1",
            Ec2 => "ec2",
            Ec3 => "ec3",
            Ec4 => "ec4",
            Esnh1 => "esnh1",
            Esnh2 => "esnh2",
            Esnh3 => "esnh3",
            Esnh4 => "esnh4",
            Ecnh1 => "ecnh1",
            Ecnh2 => "ecnh2",
            Ecnh3 => "ecnh3",
            Ecnh4 => "ecnh4",
        }
    }

    /// Which solution quantity the left side measures.
    fn lhs(self) -> Lhs {
        match self {
            Est1 | Ec1 | Esnh1 | Ecnh1 => Lhs::Value,
            Est2 | Ec2 | Esnh2 | Ecnh2 => Lhs::TimeDerivative,
            Est3 | Ec3 | Esnh3 | Ecnh3 => Lhs::SpaceDerivative,
            Est4 | Ec4 | Esnh4 | Ecnh4 => Lhs::SecondSpaceDerivative,
            Est5 => Lhs::Sobolev,
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown estimate id '{s}'")))
    }
}

impl Serialize for EstimateId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EstimateId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy)]
enum Lhs {
    Value,
    TimeDerivative,
    SpaceDerivative,
    SecondSpaceDerivative,
    Sobolev,
}

/// A solved problem together with what the right sides may need beyond the
/// spectral coefficients.
#[derive(Debug, Clone)]
pub struct EstimateInput<'a, T> {
    pub problem: &'a WaveProblem<'a, T>,
    pub solution: &'a WaveSolution<T>,
    /// Grid samples of `u0` and `u1`, used for second derivatives.
    pub u0: Option<&'a GridFunction<T>>,
    pub u1: Option<&'a GridFunction<T>>,
    /// Order `k` of the Sobolev estimate.
    pub sobolev_order: T,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub label: String,
    pub basis_id: String,
    pub problem_hash: String,
    pub horizon: f64,
    pub sobolev_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport<T> {
    pub estimate_id: EstimateId,
    pub lhs_max: T,
    pub rhs: T,
    pub ratio: T,
    pub inputs: ProblemDescriptor,
}

/// Squared norms entering the right sides.
#[derive(Debug, Clone, Copy)]
struct Norms<T> {
    u0_l2: T,
    u0_w1: T,
    u0_w2: T,
    u0_wk: T,
    u1_l2: T,
    u1_wm1: T,
    u1_w1: T,
    u1_wkm1: T,
    u0_dd: Option<T>,
    u1_dd: Option<T>,
    q_inf: Option<T>,
    nu_l2: T,
    nu_inf: T,
    f_c: T,
    f_c1: T,
}

fn sq<T: Real>(x: T) -> T {
    x * x
}

impl<T: Real> Norms<T> {
    fn collect(input: &EstimateInput<'_, T>) -> Result<Self> {
        let p = input.problem;
        let (u0, u1) = (p.u0(), p.u1());
        let k = input.sobolev_order;
        let basis = p.basis();
        let grid = basis.grid();
        let nu = basis.nu();
        let dd = |g: Option<&GridFunction<T>>| -> Result<Option<T>> {
            g.map(|g| {
                if g.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(g.second_derivative().l2_norm_sq())
            })
            .transpose()
        };
        let (f_c, f_c1) = match p.forcing() {
            Some(f) => {
                let c = f.sup_l2_norm();
                (sq(c), sq(c + f.sup_dt_l2_norm()))
            }
            None => (T::zero(), T::zero()),
        };
        Ok(Norms {
            u0_l2: u0.sobolev_norm_sq(T::zero())?,
            u0_w1: u0.sobolev_norm_sq(T::one())?,
            u0_w2: u0.sobolev_norm_sq(lit(2.0))?,
            u0_wk: u0.sobolev_norm_sq(k)?,
            u1_l2: u1.sobolev_norm_sq(T::zero())?,
            u1_wm1: u1.sobolev_norm_sq(-T::one())?,
            u1_w1: u1.sobolev_norm_sq(T::one())?,
            u1_wkm1: u1.sobolev_norm_sq(k - T::one())?,
            u0_dd: dd(input.u0)?,
            u1_dd: dd(input.u1)?,
            q_inf: nu.potential_linf(grid).map(sq),
            nu_l2: sq(nu.l2_norm(grid)),
            nu_inf: sq(nu.linf_norm(grid)),
            f_c,
            f_c1,
        })
    }
}

fn missing(id: EstimateId, norm: &str) -> Error {
    Error::MissingNorm { estimate: id.to_string(), norm: norm.to_string() }
}

fn rhs<T: Real>(id: EstimateId, n: &Norms<T>, horizon: T) -> Result<T> {
    let one = T::one();
    let q = || n.q_inf.ok_or_else(|| missing(id, "||q||_Linf"));
    let u0dd = || n.u0_dd.ok_or_else(|| missing(id, "||u0''||_L2"));
    let u1dd = || n.u1_dd.ok_or_else(|| missing(id, "||u1''||_L2"));
    let src = lit::<T>(2.0) * horizon * horizon;
    let (fc, fc1) = (src * n.f_c, src * n.f_c1);
    Ok(match id {
        Est1 => n.u0_l2 + n.u1_wm1,
        Est2 => n.u0_w1 + n.u1_l2,
        Est3 => (one + n.nu_l2) * (n.u0_w1 + n.u1_l2) + n.nu_inf * (n.u0_l2 + n.u1_wm1),
        Est4 => q()? * (n.u0_l2 + n.u1_wm1) + n.u0_w2 + n.u1_w1,
        Est5 => n.u0_wk + n.u1_wkm1,
        Ec1 => n.u0_l2 + n.u1_l2,
        Ec2 => u0dd()? + q()? * n.u0_l2 + n.u1_l2,
        Ec3 => (one + n.nu_l2) * (u0dd()? + q()? * n.u0_l2 + n.u1_l2) + n.nu_inf * (n.u0_l2 + n.u1_l2),
        Ec4 => q()? * (n.u0_l2 + n.u1_l2) + u0dd()? + u1dd()?,
        Esnh1 => n.u0_l2 + n.u1_wm1 + fc,
        Esnh2 => n.u0_w1 + n.u1_l2 + fc,
        Esnh3 => (one + n.nu_l2) * (n.u0_w1 + n.u1_l2 + fc) + n.nu_inf * (n.u0_l2 + n.u1_wm1 + fc),
        Esnh4 => q()? * (n.u0_l2 + n.u1_wm1 + fc) + n.u0_w2 + n.u1_w1 + fc1,
        Ecnh1 => n.u0_l2 + n.u1_l2 + fc,
        Ecnh2 => u0dd()? + q()? * n.u0_l2 + n.u1_l2 + fc,
        Ecnh3 => (one + n.nu_l2) * (u0dd()? + q()? * n.u0_l2 + n.u1_l2 + fc) + n.nu_inf * (n.u0_l2 + n.u1_l2 + fc),
        Ecnh4 => q()? * (n.u0_l2 + n.u1_l2 + fc) + u0dd()? + u1dd()? + fc,
    })
}

fn lhs_max<T: Real>(id: EstimateId, input: &EstimateInput<'_, T>) -> Result<T> {
    let sol = input.solution;
    let basis = input.problem.basis();
    let modes = sol
        .modes
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("estimates need a spectral solution".into()))?;
    let k = input.sobolev_order;
    let per_time = (0..sol.times.len())
        .into_par_iter()
        .map(|j| -> Result<T> {
            let amp = &modes.amplitude[j];
            Ok(match id.lhs() {
                Lhs::Value => amp.iter().map(|&a| a * a).sum(),
                Lhs::TimeDerivative => modes.rate[j].iter().map(|&v| v * v).sum(),
                Lhs::Sobolev => modes.lambdas.iter().zip(amp).map(|(&l, &a)| (k * l.ln()).exp() * a * a).sum(),
                Lhs::SpaceDerivative => spatial_derivatives(sol, basis, j)?.dx.l2_norm_sq(),
                Lhs::SecondSpaceDerivative => spatial_derivatives(sol, basis, j)?.dxx()?.l2_norm_sq(),
            })
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(per_time.into_iter().fold(T::zero(), T::max))
}

/// Content hash of the basis, data coefficients, forcing and horizon.
pub fn problem_hash<T: Real>(p: &WaveProblem<'_, T>) -> String {
    let mut h = Sha256::new();
    h.update(p.basis().id().as_bytes());
    for c in p.u0().values().iter().chain(p.u1().values()) {
        h.update(to_f64(*c).to_bits().to_le_bytes());
    }
    if let Some(f) = p.forcing() {
        for n in 1..=f.n_max() {
            for v in f.mode(n) {
                h.update(to_f64(*v).to_bits().to_le_bytes());
            }
        }
    }
    h.update(to_f64(p.horizon()).to_bits().to_le_bytes());
    hex::encode(&h.finalize()[..8])
}

pub fn verify<T: Real>(id: EstimateId, input: &EstimateInput<'_, T>) -> Result<EstimateReport<T>> {
    let norms = Norms::collect(input)?;
    let rhs = rhs(id, &norms, input.problem.horizon())?;
    let lhs_max = lhs_max(id, input)?;
    let ratio = if rhs == T::zero() && lhs_max == T::zero() { T::zero() } else { lhs_max / rhs };
    Ok(EstimateReport {
        estimate_id: id,
        lhs_max,
        rhs,
        ratio,
        inputs: ProblemDescriptor {
            label: input.label.clone(),
            basis_id: input.problem.basis().id().to_string(),
            problem_hash: problem_hash(input.problem),
            horizon: to_f64(input.problem.horizon()),
            sobolev_order: to_f64(input.sobolev_order),
        },
    })
}

/// Runs `verify` for every id; the first failure aborts.
pub fn verify_all<T: Real>(ids: &[EstimateId], input: &EstimateInput<'_, T>) -> Result<Vec<EstimateReport<T>>> {
    ids.iter().map(|&id| verify(id, input)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport<T> {
    pub estimate_id: EstimateId,
    pub max_ratio: T,
    pub entries: Vec<EstimateReport<T>>,
}

pub fn constant_sweep<T: Real>(id: EstimateId, battery: &[EstimateInput<'_, T>]) -> Result<SweepReport<T>> {
    if battery.is_empty() {
        return Err(Error::InvalidInput("empty battery".into()));
    }
    let entries = battery.par_iter().map(|input| verify(id, input)).collect::<Result<Vec<_>>>()?;
    let max_ratio = entries.iter().map(|e| e.ratio).fold(T::zero(), T::max);
    Ok(SweepReport { estimate_id: id, max_ratio, entries })
}

/// Log-log slope of a ratio series against the regularisation scale.
/// Uniform constants show up as slopes near zero.
pub fn uniformity_slope<T: Real>(epsilons: &[T], ratios: &[T]) -> Option<LineFit<T>> {
    log_log_slope(epsilons, ratios)
}

/// CSV rows `estimate_id,ratio,problem_hash`.
pub fn reports_to_csv<T: Real>(reports: &[EstimateReport<T>]) -> String {
    let mut out = String::from("estimate_id,ratio,problem_hash\n");
    for r in reports {
        out.push_str(&format!("{},{:e},{}\n", r.estimate_id, r.ratio, r.inputs.problem_hash));
    }
    out
}
