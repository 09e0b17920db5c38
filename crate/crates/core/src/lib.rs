//! Spectral wave evolution for Sturm-Liouville operators `-u'' + q u` on
//! `[0, 1]` with Dirichlet ends, where `q = nu'` may carry point masses.

pub mod data;
pub mod error;
pub mod estimates;
pub mod fit;
pub mod grid;
pub mod ode;
pub mod potential;
pub mod prufer;
pub mod quad;
pub mod real;
pub mod spectral;
pub mod veryweak;
pub mod wave;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, TimeGrid};
pub use real::Real;

pub type EigenBasisF64 = prufer::EigenBasis<f64>;
pub type NuPrimitiveF64 = potential::NuPrimitive<f64>;
pub type SpectralCoeffsF64 = spectral::SpectralCoeffs<f64>;
pub type WaveSolutionF64 = wave::WaveSolution<f64>;
pub type GridFunctionF64 = grid::GridFunction<f64>;
pub type EstimateReportF64 = estimates::EstimateReport<f64>;
pub type VeryWeakExperimentF64 = veryweak::VeryWeakExperiment<f64>;
