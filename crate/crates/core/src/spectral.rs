//! Projection onto an eigenbasis, synthesis and spectral Sobolev norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::prufer::EigenBasis;
use crate::real::{compensated_sum, to_f64, Real};

/// Coefficients `c_n = <f, phi_n>` for `n = 1..=N`, tagged with the basis
/// they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs<T> {
    basis_id: String,
    coeffs: Vec<T>,
    lambdas: Vec<T>,
}

impl<T: Real> SpectralCoeffs<T> {
    pub fn from_values(basis: &EigenBasis<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for a basis of {} modes",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(SpectralCoeffs { basis_id: basis.id().to_string(), coeffs, lambdas: basis.lambdas() })
    }

    pub fn zeros(basis: &EigenBasis<T>) -> Self {
        SpectralCoeffs { basis_id: basis.id().to_string(), coeffs: vec![T::zero(); basis.len()], lambdas: basis.lambdas() }
    }

    pub fn basis_id(&self) -> &str {
        &self.basis_id
    }

    pub fn values(&self) -> &[T] {
        &self.coeffs
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len()
    }

    /// `c_n` for `n >= 1`.
    pub fn get(&self, n: usize) -> T {
        self.coeffs[n - 1]
    }

    pub fn scaled(&self, a: T) -> Self {
        SpectralCoeffs { coeffs: self.coeffs.iter().map(|&c| a * c).collect(), ..self.clone() }
    }

    pub fn l2_norm_sq(&self) -> T {
        compensated_sum(self.coeffs.iter().map(|&c| c * c))
    }

    /// `(sum lambda_n^k c_n^2)^(1/2)`; any real `k`.
    pub fn sobolev_norm(&self, k: T) -> Result<T> {
        Ok(self.sobolev_norm_sq(k)?.sqrt())
    }

    pub fn sobolev_norm_sq(&self, k: T) -> Result<T> {
        if let Some((i, &l)) = self.lambdas.iter().enumerate().find(|(_, &l)| !(l > T::zero())) {
            return Err(Error::NonPositiveSpectrum { n: i + 1, lambda: to_f64(l) });
        }
        Ok(compensated_sum(self.lambdas.iter().zip(&self.coeffs).map(|(&l, &c)| (k * l.ln()).exp() * c * c)))
    }

    /// Rows `n,c_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,c_n\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            out.push_str(&format!("{},{:e}\n", i + 1, c));
        }
        out
    }

    pub(crate) fn ensure_basis(&self, basis: &EigenBasis<T>) -> Result<()> {
        if self.basis_id != basis.id() || self.coeffs.len() != basis.len() {
            return Err(Error::InvalidInput(format!(
                "coefficients belong to basis {} but {} was supplied",
                self.basis_id,
                basis.id()
            )));
        }
        Ok(())
    }
}

pub fn analyze<T: Real>(f: &GridFunction<T>, basis: &EigenBasis<T>) -> Result<SpectralCoeffs<T>> {
    if f.grid() != basis.grid() {
        return Err(Error::GridMismatch);
    }
    let coeffs = basis.pairs().par_iter().map(|p| f.inner(&p.phi)).collect::<Result<Vec<T>>>()?;
    SpectralCoeffs::from_values(basis, coeffs)
}

/// `sum c_n phi_n` on the basis grid, summed with compensation per node.
pub fn synthesize<T: Real>(c: &SpectralCoeffs<T>, basis: &EigenBasis<T>) -> Result<GridFunction<T>> {
    c.ensure_basis(basis)?;
    Ok(combine_modes(basis, c.values(), |p| &p.phi))
}

pub(crate) fn combine_modes<T: Real>(
    basis: &EigenBasis<T>,
    weights: &[T],
    field: impl Fn(&crate::prufer::EigenPair<T>) -> &GridFunction<T> + Sync,
) -> GridFunction<T> {
    let grid = basis.grid();
    let pairs = basis.pairs();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| compensated_sum(pairs.iter().zip(weights).map(|(p, &w)| w * field(p).values()[i])))
        .collect();
    GridFunction::new(grid, values).expect("basis grid")
}

pub fn sobolev_norm<T: Real>(c: &SpectralCoeffs<T>, k: T) -> Result<T> {
    c.sobolev_norm(k)
}

/// `||f||^2 - sum_{n <= N} c_n^2`.
pub fn parseval_defect<T: Real>(f: &GridFunction<T>, basis: &EigenBasis<T>) -> Result<T> {
    let c = analyze(f, basis)?;
    Ok(f.l2_norm_sq() - c.l2_norm_sq())
}
