//! Poisson solver and the fixed-point solver for nondivergence systems.

mod fixed_point;
mod poisson;

pub use fixed_point::{apply_l, fixed_point_solve, verify_h2_estimate, FixedPointResult, H2EstimateReport};
pub use poisson::{poisson_solve, poisson_solve_detailed, PoissonSolve};
