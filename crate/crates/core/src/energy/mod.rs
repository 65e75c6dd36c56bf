//! Stored-energy densities `C(x, Y)`, their derivative stacks and bound tables.
//!
//! `Y` is an `n x d` matrix flattened row-major (`Y_{kl}` at `k * d + l`), so
//! `m = n d` entries. Tensors of Y-derivatives are flattened the same way
//! (`∂_{Y_a}∂_{Y_b} C` at `a * m + b`, and so on). Tensors that also carry a
//! spatial derivative `∂_{x_q}` put `q` first: `[q * m + a]`, `[q * m^2 + ...]`.

mod anisotropic;
mod audit;
mod coefficient;
mod material;
mod quadratic;
mod radial;
mod saturating;

use serde::{Deserialize, Serialize};

pub use anisotropic::{anisotropic_model, AnisotropicModel};
pub use audit::{
    finite_diff_audit, verify_bounds, verify_bounds_against, BoundsReport, FdAuditReport,
};
pub use coefficient::SpatialCoefficient;
pub use material::{conic_combine, ConicMaterial};
pub use quadratic::{quadratic_model, QuadraticModel};
pub use saturating::{saturating_model, SaturatingModel};

use crate::error::{Error, Result};

/// Growth and derivative bounds of one energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub kappa0: f64,
    pub mu0: f64,
    pub kappa1: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub mu6: f64,
    pub mu7: f64,
}

impl BoundsTable {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa0, self.mu0, self.kappa1, self.mu1, self.mu2, self.mu3, self.mu4, self.mu5,
            self.mu6, self.mu7,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bounds must be finite and nonnegative: {self:?}"
            )));
        }
        if !(self.kappa0 > 0.0 && self.kappa0 <= self.mu0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < kappa0 <= mu0, got {} and {}",
                self.kappa0, self.mu0
            )));
        }
        if !(self.kappa1 > 0.0 && self.kappa1 <= self.mu1) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < kappa1 <= mu1, got {} and {}",
                self.kappa1, self.mu1
            )));
        }
        Ok(())
    }
}

/// A stored-energy density with its analytic derivatives.
///
/// `x` has length `d`, `y` length `m = n d`; output buffers have the lengths
/// documented at module level and are overwritten.
pub trait StoredEnergy: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn energy(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn hess_yy(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn third_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn fourth_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// `∂_{x_q} ∂_{Y_a} C`, length `d m`.
    fn grad_x_grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// `∂_{x_q} ∂_{Y_a} ∂_{Y_b} C`, length `d m^2`.
    fn grad_x_hess_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// `∂_{x_q} ∂_{Y_a} ∂_{Y_b} ∂_{Y_c} C`, length `d m^3`.
    fn grad_x_third_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn bounds(&self) -> &BoundsTable;
}

/// Energies of the form `ψ(x, ‖Y‖²)`.
pub(crate) trait Radial {
    /// `[ψ, ψ', ψ'', ψ''', ψ'''']` in the second argument.
    fn profile(&self, x: &[f64], q: f64) -> radial::Profile;
    /// Same, differentiated once in `x_axis`.
    fn profile_dx(&self, x: &[f64], q: f64, axis: usize) -> radial::Profile;
}

fn frob_sq(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum()
}

fn spatial_stack<R: Radial + ?Sized>(
    model: &R,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
    block: usize,
    f: fn(&[f64], &radial::Profile, &mut [f64]),
) {
    let q = frob_sq(y);
    for (axis, chunk) in out.chunks_mut(block).enumerate().take(x.len()) {
        f(y, &model.profile_dx(x, q, axis), chunk);
    }
}

macro_rules! radial_stored_energy {
    ($ty:ty, $name:expr) => {
        impl $crate::energy::StoredEnergy for $ty {
            fn name(&self) -> &str {
                $name
            }
            fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
                use $crate::energy::Radial;
                self.profile(x, $crate::energy::frob_sq(y))[0]
            }
            fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                use $crate::energy::Radial;
                let p = self.profile(x, $crate::energy::frob_sq(y));
                $crate::energy::radial::grad(y, &p, out)
            }
            fn hess_yy(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                use $crate::energy::Radial;
                let p = self.profile(x, $crate::energy::frob_sq(y));
                $crate::energy::radial::hess(y, &p, out)
            }
            fn third_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                use $crate::energy::Radial;
                let p = self.profile(x, $crate::energy::frob_sq(y));
                $crate::energy::radial::third(y, &p, out)
            }
            fn fourth_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                use $crate::energy::Radial;
                let p = self.profile(x, $crate::energy::frob_sq(y));
                $crate::energy::radial::fourth(y, &p, out)
            }
            fn grad_x_grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                let m = y.len();
                $crate::energy::spatial_stack(self, x, y, out, m, $crate::energy::radial::grad)
            }
            fn grad_x_hess_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                let m = y.len();
                $crate::energy::spatial_stack(self, x, y, out, m * m, $crate::energy::radial::hess)
            }
            fn grad_x_third_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                let m = y.len();
                $crate::energy::spatial_stack(
                    self,
                    x,
                    y,
                    out,
                    m * m * m,
                    $crate::energy::radial::third,
                )
            }
            fn bounds(&self) -> &$crate::energy::BoundsTable {
                &self.bounds
            }
        }
    };
}
pub(crate) use radial_stored_energy;
