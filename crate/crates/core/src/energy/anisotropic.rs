use super::BoundsTable;
use crate::error::{Error, Result};

/// `C(Y) = Σ_a w_a Y_a²` with one constant weight per entry of `Y`.
#[derive(Debug, Clone)]
pub struct AnisotropicModel {
    weights: Vec<f64>,
    bounds: BoundsTable,
}

/// Builds the diagonal quadratic model; `weights` has `n d` entries.
pub fn anisotropic_model(weights: Vec<f64>) -> Result<AnisotropicModel> {
    if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "anisotropic weights must be positive, got {weights:?}"
        )));
    }
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().copied().fold(0.0, f64::max);
    let bounds = BoundsTable {
        kappa0: lo,
        mu0: hi,
        kappa1: 2.0 * lo,
        mu1: 2.0 * hi,
        mu2: 0.0,
        mu3: 0.0,
        mu4: 0.0,
        mu5: 0.0,
        mu6: 0.0,
        mu7: 0.0,
    };
    bounds.validate()?;
    Ok(AnisotropicModel { weights, bounds })
}

impl AnisotropicModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl super::StoredEnergy for AnisotropicModel {
    fn name(&self) -> &str {
        "anisotropic"
    }

    fn energy(&self, _x: &[f64], y: &[f64]) -> f64 {
        self.weights.iter().zip(y).map(|(w, v)| w * v * v).sum()
    }

    fn grad_y(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, w), v) in out.iter_mut().zip(&self.weights).zip(y) {
            *o = 2.0 * w * v;
        }
    }

    fn hess_yy(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        let m = y.len();
        out.fill(0.0);
        for (a, w) in self.weights.iter().enumerate().take(m) {
            out[a * m + a] = 2.0 * w;
        }
    }

    fn third_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn fourth_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn grad_x_grad_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn grad_x_hess_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn grad_x_third_y(&self, _x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn bounds(&self) -> &BoundsTable {
        &self.bounds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{verify_bounds, StoredEnergy};

    #[test]
    fn diagonal_hessian_and_bounds() {
        let m = anisotropic_model(vec![1.0, 3.0]).unwrap();
        let mut h = [0.0; 4];
        m.hess_yy(&[0.5], &[0.2, -1.0], &mut h);
        assert_eq!(h, [2.0, 0.0, 0.0, 6.0]);
        assert_eq!((m.bounds().kappa1, m.bounds().mu1), (2.0, 6.0));
        assert!(verify_bounds(&m, 2, 1, 50, 3).unwrap().pass);
        assert!(anisotropic_model(vec![1.0, 0.0]).is_err());
    }
}
