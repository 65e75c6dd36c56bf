use std::sync::Arc;

use super::{BoundsTable, SpatialCoefficient, StoredEnergy};
use crate::error::{Error, Result};

/// Weighted sum `Σ_K α_K C_K` together with a mass density `ρ(x)`.
#[derive(Debug, Clone)]
pub struct ConicMaterial {
    models: Vec<Arc<dyn StoredEnergy>>,
    alpha: Vec<f64>,
    rho: SpatialCoefficient,
    dim: usize,
    kappa: f64,
    mu: f64,
}

/// Combines `models` with weights `alpha` on a `d`-dimensional box.
pub fn conic_combine(
    models: Vec<Arc<dyn StoredEnergy>>,
    alpha: Vec<f64>,
    rho: SpatialCoefficient,
    d: usize,
) -> Result<ConicMaterial> {
    if models.is_empty() {
        return Err(Error::InvalidParameter("a material needs at least one model".into()));
    }
    if models.len() != alpha.len() {
        return Err(Error::InvalidParameter(format!(
            "{} models but {} weights",
            models.len(),
            alpha.len()
        )));
    }
    if let Some((k, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("weight alpha[{k}] = {a} is negative")));
    }
    rho.require_positive("density rho", d)?;
    for m in &models {
        m.bounds().validate()?;
    }
    let kappa = weighted(&models, &alpha, |b| b.kappa1);
    let mu = weighted(&models, &alpha, |b| b.mu1);
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(
            "all weights vanish: sum of alpha_K kappa1_K is zero".into(),
        ));
    }
    Ok(ConicMaterial {
        models,
        alpha,
        rho,
        dim: d,
        kappa,
        mu,
    })
}

fn weighted(models: &[Arc<dyn StoredEnergy>], alpha: &[f64], f: impl Fn(&BoundsTable) -> f64) -> f64 {
    models
        .iter()
        .zip(alpha)
        .map(|(m, a)| a * f(m.bounds()))
        .sum()
}

impl ConicMaterial {
    pub fn models(&self) -> &[Arc<dyn StoredEnergy>] {
        &self.models
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn rho(&self) -> &SpatialCoefficient {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho_min(&self) -> f64 {
        self.rho.min(self.dim)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho.max(self.dim)
    }

    /// `κ = Σ α_K κ_K^{[1]}`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `μ = Σ α_K μ_K^{[1]}`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `Σ α_K f(bounds_K)`.
    pub fn weighted_bound(&self, f: impl Fn(&BoundsTable) -> f64) -> f64 {
        weighted(&self.models, &self.alpha, f)
    }

    /// Same models and density with new weights.
    pub fn with_alpha(&self, alpha: Vec<f64>) -> Result<ConicMaterial> {
        conic_combine(self.models.clone(), alpha, self.rho.clone(), self.dim)
    }

    pub fn energy(&self, x: &[f64], y: &[f64]) -> f64 {
        self.models
            .iter()
            .zip(&self.alpha)
            .map(|(m, a)| a * m.energy(x, y))
            .sum()
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.accumulate(x, y, out, |m, x, y, o| m.grad_y(x, y, o));
    }

    pub fn hess_yy(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.accumulate(x, y, out, |m, x, y, o| m.hess_yy(x, y, o));
    }

    /// `Σ α_K ∂_{x_q} ∂_{Y_a} C_K`, length `d m`.
    pub fn grad_x_grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.accumulate(x, y, out, |m, x, y, o| m.grad_x_grad_y(x, y, o));
    }

    fn accumulate(
        &self,
        x: &[f64],
        y: &[f64],
        out: &mut [f64],
        eval: impl Fn(&dyn StoredEnergy, &[f64], &[f64], &mut [f64]),
    ) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut buf = vec![0.0; out.len()];
        for (m, a) in self.models.iter().zip(&self.alpha) {
            if *a == 0.0 {
                continue;
            }
            eval(m.as_ref(), x, y, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += a * b;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::quadratic_model;

    fn two_quadratics(alpha: Vec<f64>) -> Result<ConicMaterial> {
        let models: Vec<Arc<dyn StoredEnergy>> = vec![
            Arc::new(quadratic_model(1.0, 1)?),
            Arc::new(quadratic_model(2.0, 1)?),
        ];
        conic_combine(models, alpha, SpatialCoefficient::constant(1.0), 1)
    }

    #[test]
    fn aggregates_are_linear() {
        let m = two_quadratics(vec![1.0, 1.0]).unwrap();
        assert_eq!((m.kappa(), m.mu()), (6.0, 6.0));
        let m2 = two_quadratics(vec![2.0, 2.0]).unwrap();
        assert_eq!((m2.kappa(), m2.mu()), (12.0, 12.0));
        let y = [0.5, -1.0];
        assert_eq!(m.energy(&[0.3], &y), 3.0 * 1.25);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(two_quadratics(vec![-1.0, 1.0]).is_err());
        assert!(two_quadratics(vec![0.0, 0.0]).is_err());
        assert!(two_quadratics(vec![1.0]).is_err());
    }

    #[test]
    fn single_model_equals_member() {
        let q = quadratic_model(1.5, 1).unwrap();
        let m = conic_combine(
            vec![Arc::new(q.clone())],
            vec![1.0],
            SpatialCoefficient::constant(1.0),
            1,
        )
        .unwrap();
        let y = [0.2, 0.7];
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        m.hess_yy(&[0.5], &y, &mut a);
        q.hess_yy(&[0.5], &y, &mut b);
        assert_eq!(a, b);
        assert_eq!(m.energy(&[0.5], &y), q.energy(&[0.5], &y));
    }
}
