use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid has {intervals} intervals; an even count >= 2 is required")]
    InvalidGrid { intervals: usize },

    #[error("grid functions are defined on different grids")]
    GridMismatch,

    #[error("mollifier with epsilon {epsilon} is unresolved on a grid with spacing {h} (need 2*epsilon/h >= 8)")]
    UnresolvedMollifier { epsilon: f64, h: f64 },

    #[error("epsilon ladder has {len} entries; at least 4 are needed for a fit")]
    LadderTooShort { len: usize },

    #[error("net contains a zero norm at epsilon {epsilon}; exponent is -inf")]
    DegenerateNet { epsilon: f64 },

    #[error("spectral parameter must be positive, got {lambda}")]
    NonPositiveLambda { lambda: f64 },

    #[error("adaptive integrator failed at x = {x} with step {h}")]
    StepFailure { x: f64, h: f64 },

    #[error("no sign change of theta(1) - pi*{n} in bracket [{lo}, {hi}]")]
    BracketFailure { n: usize, lo: f64, hi: f64 },

    #[error("mode {n}: phase residual {residual} exceeds tolerance")]
    ResidualTooLarge { n: usize, residual: f64 },

    #[error("mode {n}: {source}")]
    Mode { n: usize, source: Box<Error> },

    #[error("eigenbasis is not orthonormal: max |G - I| = {deviation}")]
    NotOrthonormal { deviation: f64 },

    #[error("eigenvalues are not strictly increasing at mode {n}")]
    NonMonotoneSpectrum { n: usize },

    #[error("eigenvalue lambda_{n} = {lambda} is not positive")]
    NonPositiveSpectrum { n: usize, lambda: f64 },

    #[error("time step {dt} under-resolves the top mode (sqrt(lambda_max)*dt = {product} > 0.5)")]
    TimeGridTooCoarse { dt: f64, product: f64 },

    #[error("second derivative requested at delta atom x = {x}")]
    AtomEvaluation { x: f64 },

    #[error("CFL violation: dt = {dt} > h = {h}")]
    CflViolation { dt: f64, h: f64 },

    #[error("{estimate}: missing norm {norm}")]
    MissingNorm { estimate: String, norm: String },

    #[error("potential has delta atoms; a bounded potential is required")]
    NotBoundedPotential,

    #[error("epsilon = {epsilon}: {source}")]
    AtEpsilon { epsilon: f64, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_mode(n: usize, e: Error) -> Error {
        match e {
            Error::Mode { .. } | Error::BracketFailure { .. } | Error::ResidualTooLarge { .. } => e,
            other => Error::Mode { n, source: Box::new(other) },
        }
    }

    pub(crate) fn at_epsilon(epsilon: f64, e: Error) -> Error {
        Error::AtEpsilon { epsilon, source: Box::new(e) }
    }

    /// True for failures of the numerical machinery, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Mode { source, .. } | Error::AtEpsilon { source, .. } => source.is_numerical(),
            Error::InvalidInput(_)
            | Error::InvalidGrid { .. }
            | Error::GridMismatch
            | Error::UnresolvedMollifier { .. }
            | Error::LadderTooShort { .. }
            | Error::CflViolation { .. }
            | Error::TimeGridTooCoarse { .. }
            | Error::NotBoundedPotential
            | Error::MissingNorm { .. } => false,
            _ => true,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
