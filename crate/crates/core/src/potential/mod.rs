//! Singular potentials `q = nu'`, their mollified regularisations and
//! classification of epsilon-nets.

mod mollifier;
mod net;
mod nu;

pub use mollifier::{
    extend_by_zero, mollified_primitive, mollify_grid_function, mollify_potential, MollifierProfile,
    MollifierSpec, ZeroExtension,
};
pub use net::{
    check_negligibility, default_ladder, fit_moderateness, ExponentFit, NegligibilityCheck, NormKind,
    RegularizedNet, EXPONENT_TOLERANCE,
};
pub use nu::{Jump, NuPrimitive, Sampled, SmoothPart};
