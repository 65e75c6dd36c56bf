use super::radial::Profile;
use super::{radial_stored_energy, BoundsTable, Radial, SpatialCoefficient};
use crate::error::Result;

/// Entries of `Y` are assumed to stay in `[-Y_BOX, Y_BOX]` when bounding the
/// mixed derivative `∂_l ∂_{Y_kl} C = 2 ∂_l c · Y_kl`, which grows linearly.
pub const Y_BOX: f64 = 3.0;

/// `C(x, Y) = c(x) ‖Y‖²_F`.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    c: SpatialCoefficient,
    bounds: BoundsTable,
}

/// Builds the quadratic model over a `d`-dimensional box.
pub fn quadratic_model(c: impl Into<SpatialCoefficient>, d: usize) -> Result<QuadraticModel> {
    let c = c.into();
    c.require_positive("quadratic coefficient c", d)?;
    let (lo, hi, dc) = (c.min(d), c.max(d), c.sup_derivative());
    let bounds = BoundsTable {
        kappa0: lo,
        mu0: hi,
        kappa1: 2.0 * lo,
        mu1: 2.0 * hi,
        mu2: 0.0,
        mu3: 0.0,
        mu4: 2.0 * dc * Y_BOX,
        mu5: 2.0 * dc,
        mu6: 2.0 * dc,
        mu7: 0.0,
    };
    bounds.validate()?;
    Ok(QuadraticModel { c, bounds })
}

impl QuadraticModel {
    pub fn coefficient(&self) -> &SpatialCoefficient {
        &self.c
    }
}

impl Radial for QuadraticModel {
    fn profile(&self, x: &[f64], q: f64) -> Profile {
        let c = self.c.value(x);
        [c * q, c, 0.0, 0.0, 0.0]
    }

    fn profile_dx(&self, x: &[f64], q: f64, axis: usize) -> Profile {
        let dc = self.c.derivative(x, axis);
        [dc * q, dc, 0.0, 0.0, 0.0]
    }
}

radial_stored_energy!(QuadraticModel, "quadratic");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::StoredEnergy;

    #[test]
    fn identity_state_values() {
        let m = quadratic_model(1.0, 2).unwrap();
        let y = [1.0, 0.0, 0.0, 1.0];
        let x = [0.5, 0.5];
        assert_eq!(m.energy(&x, &y), 2.0);
        let mut g = [0.0; 4];
        m.grad_y(&x, &y, &mut g);
        assert_eq!(g, [2.0, 0.0, 0.0, 2.0]);
        let b = m.bounds();
        assert_eq!((b.kappa1, b.mu1), (2.0, 2.0));
        assert_eq!((b.mu4, b.mu5, b.mu6), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        assert!(quadratic_model(0.0, 1).is_err());
        let ramp = SpatialCoefficient::Affine {
            base: 0.2,
            gradient: vec![-0.5],
        };
        assert!(quadratic_model(ramp, 1).is_err());
    }

    #[test]
    fn affine_coefficient_bounds() {
        let c = SpatialCoefficient::Affine {
            base: 1.0,
            gradient: vec![0.5],
        };
        let m = quadratic_model(c, 1).unwrap();
        let b = m.bounds();
        assert_eq!((b.kappa0, b.mu0, b.kappa1, b.mu1), (1.0, 1.5, 2.0, 3.0));
        assert_eq!((b.mu4, b.mu5, b.mu6), (3.0, 1.0, 1.0));
        let mut t = [0.0; 8];
        m.third_y(&[0.4], &[0.3, -0.7], &mut t);
        assert!(t.iter().all(|v| *v == 0.0));
    }
}
