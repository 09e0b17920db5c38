//! JSON experiment configurations. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};
use vww_core::data::{DataSpec, ForcingSpec};
use vww_core::estimates::EstimateId;
use vww_core::potential::{MollifierSpec, NuPrimitive};
use vww_core::veryweak::{Perturbation, VeryWeakExperiment};
use vww_core::Grid;

fn default_time_samples() -> usize {
    200
}

fn default_sobolev_order() -> f64 {
    1.0
}

fn default_suite() -> Vec<EstimateId> {
    EstimateId::core_suite().to_vec()
}

/// Potential, optionally regularised, and the size of its eigenbasis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub nu: NuPrimitive<f64>,
    #[serde(default)]
    pub mollifier: Option<MollifierSpec<f64>>,
    pub n_max: usize,
    pub grid: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigsConfig {
    pub basis: BasisConfig,
    /// Also write the basis as JSON, with eigenfunction samples if `samples`.
    #[serde(default)]
    pub cache: bool,
    #[serde(default)]
    pub samples: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub basis: BasisConfig,
    #[serde(default = "DataSpec::zero")]
    pub u0: DataSpec,
    #[serde(default = "DataSpec::zero")]
    pub u1: DataSpec,
    pub horizon: f64,
    #[serde(default = "default_time_samples")]
    pub time_samples: usize,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatesConfig {
    pub problem: SolveConfig,
    #[serde(default = "default_suite")]
    pub estimates: Vec<EstimateId>,
    #[serde(default = "default_sobolev_order")]
    pub sobolev_order: f64,
    /// Replace `u0`, `u1` by a seeded battery of random smooth data.
    #[serde(default)]
    pub battery: Option<BatteryConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    Existence,
    Uniqueness { perturbation: Perturbation<f64> },
    Consistency { tolerance: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VeryWeakConfig {
    pub experiment: VeryWeakExperiment<f64>,
    pub run: RunConfig,
}
