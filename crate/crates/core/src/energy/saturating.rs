use super::radial::{sup_ratio, Profile};
use super::{radial_stored_energy, BoundsTable, Radial, SpatialCoefficient};
use crate::error::{Error, Result};

/// `C(x, Y) = a ‖Y‖² + b(x) s² g(‖Y‖² / s²)` with the saturator `g(r) = r / (1 + r)`.
///
/// The Hessian eigenvalues lie in `[2a - b/2, 2a + 2b]`, so construction
/// requires `b_max < 4a`.
#[derive(Debug, Clone)]
pub struct SaturatingModel {
    a: f64,
    b: SpatialCoefficient,
    s: f64,
    bounds: BoundsTable,
}

/// `g^(j)(r)` for `j = 0..=4`.
fn saturator(r: f64) -> [f64; 5] {
    let u = 1.0 / (1.0 + r);
    [
        r * u,
        u * u,
        -2.0 * u.powi(3),
        6.0 * u.powi(4),
        -24.0 * u.powi(5),
    ]
}

/// Entrywise bound of the third Y-derivative of `b s² g(q / s²)` per unit `b`.
fn third_bound(s: f64) -> f64 {
    (24.0 * sup_ratio(0.5, 3.0) + 48.0 * sup_ratio(1.5, 4.0)) / s
}

/// Same for the fourth derivative.
fn fourth_bound(s: f64) -> f64 {
    (24.0 + 288.0 * sup_ratio(1.0, 4.0) + 384.0 * sup_ratio(2.0, 5.0)) / (s * s)
}

/// Builds the saturating model over a `d`-dimensional box.
pub fn saturating_model(
    a: f64,
    b: impl Into<SpatialCoefficient>,
    s: f64,
    d: usize,
) -> Result<SaturatingModel> {
    let b = b.into();
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    if !b.is_finite() || b.min(d) < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "b must be nonnegative, infimum is {}",
            b.min(d)
        )));
    }
    let b_max = b.max(d);
    let kappa1 = 2.0 * a - 0.5 * b_max;
    if !(kappa1 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Hessian lower bound 2a - b/2 = {kappa1} is not positive (a={a}, b_max={b_max})"
        )));
    }
    let db = b.sup_derivative();
    let bounds = BoundsTable {
        kappa0: a,
        mu0: a + b_max,
        kappa1,
        mu1: 2.0 * a + 2.0 * b_max,
        mu2: b_max * third_bound(s),
        mu3: b_max * fourth_bound(s),
        mu4: db * 2.0 * s * sup_ratio(0.5, 2.0),
        mu5: db * (2.0 + 8.0 * sup_ratio(1.0, 3.0)),
        mu6: db * (2.0 + 8.0 * sup_ratio(1.0, 3.0)),
        mu7: db * third_bound(s),
    };
    bounds.validate()?;
    Ok(SaturatingModel { a, b, s, bounds })
}

impl SaturatingModel {
    fn radial_part(&self, weight: f64, q: f64) -> Profile {
        let s2 = self.s * self.s;
        let g = saturator(q / s2);
        [
            weight * s2 * g[0],
            weight * g[1],
            weight * g[2] / s2,
            weight * g[3] / (s2 * s2),
            weight * g[4] / (s2 * s2 * s2),
        ]
    }
}

impl Radial for SaturatingModel {
    fn profile(&self, x: &[f64], q: f64) -> Profile {
        let mut p = self.radial_part(self.b.value(x), q);
        p[0] += self.a * q;
        p[1] += self.a;
        p
    }

    fn profile_dx(&self, x: &[f64], q: f64, axis: usize) -> Profile {
        self.radial_part(self.b.derivative(x, axis), q)
    }
}

radial_stored_energy!(SaturatingModel, "saturating");
