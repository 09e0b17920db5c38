//! Epsilon-indexed nets and their moderateness / negligibility fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::log_log_slope;
use crate::grid::GridFunction;
use crate::real::{lit, to_f64, Real};

/// Slack allowed on fitted exponents.
pub const EXPONENT_TOLERANCE: f64 = 0.2;

/// `eps_k = 2^-k` for `k = 2..=9`.
pub fn default_ladder<T: Real>() -> Vec<T> {
    (2..=9).map(|k| lit::<T>(2f64.powi(-k))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Linf,
    /// `W^k_L`, stored with its order.
    Sobolev(f64),
    /// `sup_t ||.||_{L2}` over a time grid.
    SupTimeL2,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormKind::L2 => write!(f, "L2"),
            NormKind::Linf => write!(f, "Linf"),
            NormKind::Sobolev(k) => write!(f, "W^{k}"),
            NormKind::SupTimeL2 => write!(f, "C(L2)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedNet<T> {
    ladder: Vec<T>,
    norms: Vec<T>,
    norm_kind: NormKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    members: Option<Vec<GridFunction<T>>>,
}

impl<T: Real> RegularizedNet<T> {
    pub fn from_norms(ladder: Vec<T>, norms: Vec<T>, norm_kind: NormKind) -> Result<Self> {
        if ladder.len() != norms.len() {
            return Err(Error::InvalidInput("ladder and norm series differ in length".into()));
        }
        if ladder.iter().any(|&e| !(e > T::zero())) || ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidInput("epsilon ladder must be positive and strictly decreasing".into()));
        }
        Ok(RegularizedNet { ladder, norms, norm_kind, members: None })
    }

    /// Net of grid functions; the norm of each member is recorded.
    pub fn from_members(ladder: Vec<T>, members: Vec<GridFunction<T>>, norm_kind: NormKind) -> Result<Self> {
        if let Some(first) = members.first() {
            for m in &members[1..] {
                first.ensure_same_grid(m)?;
            }
        }
        let norms = members
            .iter()
            .map(|m| match norm_kind {
                NormKind::Linf => Ok(m.linf_norm()),
                NormKind::L2 | NormKind::SupTimeL2 => Ok(m.l2_norm()),
                NormKind::Sobolev(_) => {
                    Err(Error::InvalidInput("Sobolev norms need an eigenbasis; use from_norms".into()))
                }
            })
            .collect::<Result<Vec<T>>>()?;
        let mut net = Self::from_norms(ladder, norms, norm_kind)?;
        net.members = Some(members);
        Ok(net)
    }

    pub fn ladder(&self) -> &[T] {
        &self.ladder
    }

    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn members(&self) -> Option<&[GridFunction<T>]> {
        self.members.as_deref()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.norms.iter().all(|&n| n == T::zero())
    }

    fn check_fit_input(&self) -> Result<()> {
        if self.ladder.len() < 4 {
            return Err(Error::LadderTooShort { len: self.ladder.len() });
        }
        if let Some((e, _)) = self.ladder.iter().zip(&self.norms).find(|(_, &n)| !(n > T::zero())) {
            return Err(Error::DegenerateNet { epsilon: to_f64(*e) });
        }
        Ok(())
    }

    /// CSV rows `epsilon,norm,norm_kind`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["epsilon", "norm", "norm_kind"]).map_err(io)?;
        for (e, n) in self.ladder.iter().zip(&self.norms) {
            w.write_record([format!("{e:e}"), format!("{n:e}"), self.norm_kind.to_string()]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Growth exponent `N` in `norm ~ C eps^-N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit<T> {
    pub exponent: T,
    pub max_deviation: T,
}

pub fn fit_moderateness<T: Real>(net: &RegularizedNet<T>) -> Result<ExponentFit<T>> {
    net.check_fit_input()?;
    let inv: Vec<T> = net.ladder.iter().map(|&e| T::one() / e).collect();
    let fit = log_log_slope(&inv, &net.norms).expect("validated positive norms on distinct epsilons");
    Ok(ExponentFit { exponent: fit.slope, max_deviation: fit.max_deviation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegligibilityCheck<T> {
    pub order: u32,
    /// Fitted decay rate in `norm ~ C eps^slope`.
    pub slope: T,
    pub max_deviation: T,
    pub pass: bool,
}

/// Passes when the fitted decay rate is at least `order - 0.2`.
pub fn check_negligibility<T: Real>(net: &RegularizedNet<T>, order: u32) -> Result<NegligibilityCheck<T>> {
    if order == 0 {
        return Err(Error::InvalidInput("negligibility order must be positive".into()));
    }
    net.check_fit_input()?;
    let fit = log_log_slope(&net.ladder, &net.norms).expect("validated positive norms on distinct epsilons");
    let pass = fit.slope >= lit::<T>(order as f64 - EXPONENT_TOLERANCE);
    Ok(NegligibilityCheck { order, slope: fit.slope, max_deviation: fit.max_deviation, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::potential::{mollify_potential, MollifierProfile, MollifierSpec, NuPrimitive, SmoothPart};
    use proptest::prelude::*;

    fn ladder6() -> Vec<f64> {
        (1..=6).map(|k| 2f64.powi(-k)).collect()
    }

    #[test]
    fn exact_inverse_square_growth() {
        let l = ladder6();
        let norms = l.iter().map(|e| e.powi(-2)).collect();
        let fit = fit_moderateness(&RegularizedNet::from_norms(l, norms, NormKind::L2).unwrap()).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_net_has_zero_exponent() {
        let l = ladder6();
        let net = RegularizedNet::from_norms(l, vec![3.0; 6], NormKind::L2).unwrap();
        assert!(fit_moderateness(&net).unwrap().exponent.abs() < 1e-12);
    }

    #[test]
    fn zero_norm_is_degenerate() {
        let mut norms = vec![1.0; 6];
        norms[3] = 0.0;
        let net = RegularizedNet::from_norms(ladder6(), norms, NormKind::L2).unwrap();
        assert!(matches!(fit_moderateness(&net), Err(Error::DegenerateNet { .. })));
    }

    #[test]
    fn short_ladder_is_rejected() {
        let net = RegularizedNet::from_norms(vec![0.5, 0.25, 0.125], vec![1.0; 3], NormKind::L2).unwrap();
        assert!(matches!(fit_moderateness(&net), Err(Error::LadderTooShort { len: 3 })));
    }

    #[test]
    fn ladder_must_decrease() {
        assert!(RegularizedNet::from_norms(vec![0.25, 0.5], vec![1.0, 1.0], NormKind::L2).is_err());
    }

    #[test]
    fn cubic_decay_is_negligible_at_three_not_five() {
        let l = ladder6();
        let norms: Vec<f64> = l.iter().map(|e| e.powi(3)).collect();
        let net = RegularizedNet::from_norms(l, norms, NormKind::L2).unwrap();
        let c3 = check_negligibility(&net, 3).unwrap();
        assert!(c3.pass && (c3.slope - 3.0).abs() < 1e-12);
        assert!(!check_negligibility(&net, 5).unwrap().pass);
    }

    #[test]
    fn mollified_delta_sup_norm_grows_like_inverse_epsilon() {
        let g = Grid::new(2048).unwrap();
        let nu = NuPrimitive::delta(0.5_f64, 1.0).unwrap();
        let ladder = default_ladder::<f64>();
        let members = ladder
            .iter()
            .map(|&e| mollify_potential(&nu, &MollifierSpec::standard(e).unwrap(), g).unwrap())
            .collect();
        let net = RegularizedNet::from_members(ladder, members, NormKind::Linf).unwrap();
        let fit = fit_moderateness(&net).unwrap();
        assert!((fit.exponent - 1.0).abs() <= 0.05, "{fit:?}");
    }

    #[test]
    fn two_profiles_differ_at_first_order_for_smooth_q() {
        // q = sin(2 pi x) vanishes at both ends, so zero extension adds no
        // O(1) boundary layer; the skewed profile's first moment gives O(eps).
        let g = Grid::new(2048).unwrap();
        let nu = NuPrimitive::smooth(SmoothPart::Cosine { amplitude: -1.0 / (2.0 * std::f64::consts::PI), mode: 1 });
        let ladder = default_ladder::<f64>();
        let members = ladder
            .iter()
            .map(|&e| {
                let a = mollify_potential(&nu, &MollifierSpec::standard(e).unwrap(), g).unwrap();
                let b = mollify_potential(&nu, &MollifierSpec::new(MollifierProfile::Skewed, e).unwrap(), g).unwrap();
                a.sub(&b).unwrap()
            })
            .collect();
        let net = RegularizedNet::from_members(ladder, members, NormKind::Linf).unwrap();
        let check = check_negligibility(&net, 1).unwrap();
        assert!(check.pass, "{check:?}");
        assert!(!check_negligibility(&net, 2).unwrap().pass);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let net = RegularizedNet::from_norms(vec![0.5, 0.25], vec![1.0, 2.0], NormKind::Linf).unwrap();
        let text = net.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epsilon,norm,norm_kind");
        assert_eq!(lines.len(), 3);
    }

    proptest! {
        #[test]
        fn negligible_nets_have_negative_growth(rate in 0.5f64..6.0, c in 0.01f64..100.0) {
            let l = ladder6();
            let norms: Vec<f64> = l.iter().map(|e| c * e.powf(rate)).collect();
            let net = RegularizedNet::from_norms(l, norms, NormKind::L2).unwrap();
            let m = rate.floor().max(1.0) as u32;
            let neg = check_negligibility(&net, m).unwrap();
            let growth = fit_moderateness(&net).unwrap();
            if neg.pass {
                prop_assert!(growth.exponent <= -(m as f64) + EXPONENT_TOLERANCE + 1e-12);
            }
        }
    }
}
