//! Explicit stability constants and their numerical verification.

mod constants;
mod gronwall;
mod verify;

pub use constants::{cbar, embedding_bound, stability_constants, StabilityConstants};
pub use gronwall::{expm1_ratio, gronwall_bound, GronwallProblem, StepFunction};
pub use verify::{
    margin, pair_cordes, perturbation_norms, verify_pair, verify_u2_bound, BoundCheck, PairCordes,
    PairReport, PerturbationNorms, U2Check, BOUND_SLACK,
};
