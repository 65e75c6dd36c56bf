//! Nondivergence coefficients `a_{klij}(x)` and the generalized Cordes condition.
//!
//! At each node the coefficients form a symmetric `m x m` matrix (`m = n d`)
//! with row `(k, l)` at `k * d + l` and column `(i, j)` at `i * d + j`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::ConicMaterial;
use crate::error::{Error, Result};
use crate::grid::{Field, FieldShape, Grid};

/// Default threshold below which `inf ε` counts as failure.
pub const EPS_TOL: f64 = 1e-10;

/// Coefficient matrices at every interior node (point-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: Grid,
    data: Vec<f64>,
}

impl CoefficientField {
    /// Evaluates `f(x, out)` with `out` an `m x m` row-major matrix.
    pub fn from_fn<F>(grid: &Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let m = grid.nd();
        let d = grid.dim();
        let mut data = vec![0.0; grid.num_points() * m * m];
        for (p, chunk) in data.chunks_mut(m * m).enumerate() {
            f(&grid.position(p)[..d], chunk);
        }
        Self::from_values(grid, data)
    }

    pub fn from_values(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        let m = grid.nd();
        if data.len() != grid.num_points() * m * m {
            return Err(Error::ShapeMismatch(format!(
                "coefficient data has {} entries, expected {}",
                data.len(),
                grid.num_points() * m * m
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficients".into()));
        }
        Ok(Self { grid: *grid, data })
    }

    /// The same matrix at every node.
    pub fn constant(grid: &Grid, a: &[f64]) -> Result<Self> {
        Self::from_fn(grid, |_, out| out.copy_from_slice(a))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Matrix at node `p`.
    pub fn at(&self, p: usize) -> &[f64] {
        let mm = self.grid.nd() * self.grid.nd();
        &self.data[p * mm..(p + 1) * mm]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest `|a_{klij} - a_{ijkl}|` over all nodes.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.grid.nd();
        (0..self.grid.num_points())
            .map(|p| {
                let a = self.at(p);
                let mut worst: f64 = 0.0;
                for r in 0..m {
                    for c in 0..m {
                        worst = worst.max((a[r * m + c] - a[c * m + r]).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }
}

/// `a_{klij}(x) = Σ_K α_K ∂_{Y_kl} ∂_{Y_ij} C_K(x, state(x))`.
pub fn assemble_coefficients(material: &ConicMaterial, state: &Field) -> Result<CoefficientField> {
    if state.shape() != FieldShape::Matrix {
        return Err(Error::ShapeMismatch("state must be a matrix field".into()));
    }
    let grid = *state.grid();
    if material.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "material is {}-dimensional, grid is {}-dimensional",
            material.dim(),
            grid.dim()
        )));
    }
    let m = grid.nd();
    let d = grid.dim();
    let mut data = vec![0.0; grid.num_points() * m * m];
    data.par_chunks_mut(m * m).enumerate().for_each(|(p, chunk)| {
        let y: Vec<f64> = (0..m).map(|c| state.at(p, c)).collect();
        material.hess_yy(&grid.position(p)[..d], &y, chunk);
    });
    CoefficientField::from_values(&grid, data)
}

/// Result of the dimension condition `((m-2)/(m-1)) μ < κ < (m/(m-1)) μ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DimensionCheck {
    pub kappa: f64,
    pub mu: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

pub fn check_dimension_condition(material: &ConicMaterial, nd: usize) -> DimensionCheck {
    let (kappa, mu) = (material.kappa(), material.mu());
    let m = nd as f64;
    let lower = (m - 2.0) / (m - 1.0) * mu;
    let upper = m / (m - 1.0) * mu;
    DimensionCheck {
        kappa,
        mu,
        lower,
        upper,
        ok: lower < kappa && kappa < upper,
    }
}

/// Pointwise Cordes quantities and their extremes over the lattice.
#[derive(Debug, Clone, Serialize)]
pub struct CordesReport {
    pub nd: usize,
    /// `inf_x ε(x)` with `ε(x) = T²/S - (nd - 1)`.
    pub epsilon_inf: f64,
    /// Node index attaining `epsilon_inf`.
    pub epsilon_argmin: usize,
    /// Value handed to downstream constants (strictly inside `(0, 1)`).
    pub epsilon_used: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Smallest eigenvalue of the coefficient matrices over the lattice.
    pub min_eigenvalue: f64,
    pub pass: bool,
    #[serde(skip)]
    pub epsilon: Vec<f64>,
    /// `α(x) = T / S` at each node.
    #[serde(skip)]
    pub alpha: Vec<f64>,
}

impl CordesReport {
    /// `α(x)` as a scalar field.
    pub fn alpha_field(&self, grid: &Grid) -> Result<Field> {
        Field::from_values(grid, FieldShape::Scalar, self.alpha.clone())
    }

    /// `√(1 - ε)` with the downstream ε.
    pub fn contraction_bound(&self) -> f64 {
        (1.0 - self.epsilon_used).sqrt()
    }
}

/// `ε` passed downstream: slightly below the lattice infimum, capped below one.
pub fn epsilon_for_constants(epsilon_inf: f64) -> f64 {
    (epsilon_inf - 1e-12)
        .max((1.0 - 1e-9) * epsilon_inf)
        .min(1.0 - 1e-12)
}

/// Evaluates the Cordes condition at every node.
pub fn check_cordes(coeffs: &CoefficientField) -> Result<CordesReport> {
    check_cordes_with_tol(coeffs, EPS_TOL)
}

pub fn check_cordes_with_tol(coeffs: &CoefficientField, tol_eps: f64) -> Result<CordesReport> {
    let grid = coeffs.grid();
    let m = grid.nd();
    let np = grid.num_points();
    let per_point: Vec<(f64, f64, f64)> = (0..np)
        .into_par_iter()
        .map(|p| {
            let a = coeffs.at(p);
            let s: f64 = a.iter().map(|v| v * v).sum();
            let t: f64 = (0..m).map(|r| a[r * m + r]).sum();
            let eig = DMatrix::from_row_slice(m, m, a).symmetric_eigen().eigenvalues.min();
            (s, t, eig)
        })
        .collect();
    let mut epsilon = Vec::with_capacity(np);
    let mut alpha = Vec::with_capacity(np);
    let mut min_eigenvalue = f64::INFINITY;
    for (p, (s, t, eig)) in per_point.into_iter().enumerate() {
        if !(t > 0.0) {
            let x = grid.position(p);
            return Err(Error::CordesFailed(format!(
                "nonpositive trace {t:e} at node {p} (x = {:?})",
                &x[..grid.dim()]
            )));
        }
        epsilon.push(t * t / s - (m as f64 - 1.0));
        alpha.push(t / s);
        min_eigenvalue = min_eigenvalue.min(eig);
    }
    let (epsilon_argmin, epsilon_inf) = epsilon
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (p, e)| if e < acc.1 { (p, e) } else { acc });
    let alpha_min = alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let alpha_max = alpha.iter().copied().fold(0.0, f64::max);
    let pass = epsilon_inf > tol_eps && min_eigenvalue > 0.0;
    Ok(CordesReport {
        nd: m,
        epsilon_inf,
        epsilon_argmin,
        epsilon_used: epsilon_for_constants(epsilon_inf),
        alpha_min,
        alpha_max,
        min_eigenvalue,
        pass,
        epsilon,
        alpha,
    })
}

/// Solution-operator constants attached to a passing Cordes report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CordesConstants {
    pub khat: f64,
    pub epsilon: f64,
    /// `C(α) = K̂ sup α / (1 - √(1 - ε))`.
    pub c_alpha: f64,
    /// `K̂ / (1 - √(1 - ε)) · μ / κ`.
    pub chat_inv_kappa: f64,
    /// `K̂ / (1 - √(1 - ε)) · μ / κ²`; the variant used by the stability constants.
    pub chat_inv_kappa_sq: f64,
    /// `λ = κ / (nd μ)`.
    pub lambda: f64,
}

impl CordesConstants {
    /// Evaluates the constants from their ingredients.
    pub fn evaluate(khat: f64, alpha_sup: f64, epsilon: f64, kappa: f64, mu: f64, nd: usize) -> Self {
        let denom = 1.0 - (1.0 - epsilon).sqrt();
        CordesConstants {
            khat,
            epsilon,
            c_alpha: khat * alpha_sup / denom,
            chat_inv_kappa: khat / denom * mu / kappa,
            chat_inv_kappa_sq: khat / denom * mu / (kappa * kappa),
            lambda: kappa / (nd as f64 * mu),
        }
    }

    /// `Ĉ(α)` as used downstream.
    pub fn chat(&self) -> f64 {
        self.chat_inv_kappa_sq
    }
}

pub fn cordes_constants(report: &CordesReport, khat: f64, material: &ConicMaterial) -> Result<CordesConstants> {
    if !report.pass {
        return Err(Error::CordesFailed(format!(
            "Cordes condition not satisfied (inf epsilon = {:e}, min eigenvalue = {:e})",
            report.epsilon_inf, report.min_eigenvalue
        )));
    }
    Ok(CordesConstants::evaluate(
        khat,
        report.alpha_max,
        report.epsilon_used,
        material.kappa(),
        material.mu(),
        report.nd,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{conic_combine, quadratic_model, saturating_model, StoredEnergy};
    use crate::grid::make_grid;
    use std::sync::Arc;

    fn isotropic(m: usize, c: f64) -> Vec<f64> {
        let mut a = vec![0.0; m * m];
        (0..m).for_each(|r| a[r * m + r] = c);
        a
    }

    #[test]
    fn isotropic_coefficients() {
        for (d, n) in [(1, 2), (2, 1), (2, 2)] {
            let g = make_grid(d, n, 5).unwrap();
            let c = CoefficientField::constant(&g, &isotropic(n * d, 2.0)).unwrap();
            let r = check_cordes(&c).unwrap();
            assert!((r.epsilon_inf - 1.0).abs() < 1e-14);
            assert!((r.alpha_max - 0.5).abs() < 1e-15 && (r.alpha_min - 0.5).abs() < 1e-15);
            assert!(r.pass);
        }
    }

    #[test]
    fn diagonal_closed_form() {
        let g = make_grid(2, 1, 4).unwrap();
        for t in [0.1, 0.25, 0.5, 1.0] {
            let c = CoefficientField::constant(&g, &[1.0, 0.0, 0.0, t]).unwrap();
            let r = check_cordes(&c).unwrap();
            assert!((r.epsilon_inf - 2.0 * t / (1.0 + t * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trace_reports_location() {
        let g = make_grid(1, 2, 4).unwrap();
        let c = CoefficientField::from_fn(&g, |x, a| {
            let v = if (x[0] - 0.4).abs() < 1e-12 { 0.0 } else { 1.0 };
            a.copy_from_slice(&[v, 0.0, 0.0, v]);
        })
        .unwrap();
        match check_cordes(&c) {
            Err(Error::CordesFailed(msg)) => assert!(msg.contains("node 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaling_invariance() {
        let g = make_grid(2, 2, 4).unwrap();
        let c = CoefficientField::from_fn(&g, |x, a| {
            a.copy_from_slice(&isotropic(4, 2.0));
            a[1] = 0.3 * x[0];
            a[4] = 0.3 * x[0];
            a[15] = 1.5 + x[1];
        })
        .unwrap();
        let r1 = check_cordes(&c).unwrap();
        let r2 = check_cordes(&c.scaled(3.0)).unwrap();
        assert_eq!(r1.pass, r2.pass);
        assert!((r1.epsilon_inf - r2.epsilon_inf).abs() < 1e-13);
        assert!((r1.alpha_max / 3.0 - r2.alpha_max).abs() < 1e-13);
    }

    #[test]
    fn dimension_condition_examples() {
        let q = quadratic_model(1.0, 1).unwrap();
        let mat = conic_combine(vec![Arc::new(q)], vec![1.0], 1.0.into(), 1).unwrap();
        assert!(check_dimension_condition(&mat, 2).ok);
        assert!(check_dimension_condition(&mat, 4).ok);
    }

    /// A model with arbitrary bound constants, only its table matters here.
    #[derive(Debug)]
    struct TableOnly(crate::energy::BoundsTable);

    impl StoredEnergy for TableOnly {
        fn name(&self) -> &str {
            "table"
        }
        fn energy(&self, _: &[f64], _: &[f64]) -> f64 {
            0.0
        }
        fn grad_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn hess_yy(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn third_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn fourth_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn grad_x_grad_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn grad_x_hess_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn grad_x_third_y(&self, _: &[f64], _: &[f64], _: &mut [f64]) {}
        fn bounds(&self) -> &crate::energy::BoundsTable {
            &self.0
        }
    }

    #[test]
    fn dimension_condition_wide_spread() {
        let q = quadratic_model(1.0, 1).unwrap();
        let mut b = *q.bounds();
        b.kappa1 = 1.0;
        b.mu1 = 10.0;
        let models: Vec<Arc<dyn StoredEnergy>> = vec![Arc::new(TableOnly(b)), Arc::new(TableOnly(b))];
        let mat = conic_combine(models, vec![1.0, 1.0], 1.0.into(), 1).unwrap();
        let c2 = check_dimension_condition(&mat, 2);
        assert!(c2.ok && c2.kappa == 2.0 && c2.mu == 20.0);
        assert!(!check_dimension_condition(&mat, 4).ok);
    }

    #[test]
    fn assembled_quadratic_is_isotropic() {
        let g = make_grid(2, 2, 4).unwrap();
        let models: Vec<Arc<dyn StoredEnergy>> = vec![
            Arc::new(quadratic_model(1.0, 2).unwrap()),
            Arc::new(quadratic_model(2.0, 2).unwrap()),
        ];
        let mat = conic_combine(models, vec![1.0, 1.0], 1.0.into(), 2).unwrap();
        let state = Field::from_values(&g, FieldShape::Matrix, vec![0.7; 64]).unwrap();
        let c = assemble_coefficients(&mat, &state).unwrap();
        assert_eq!(c, CoefficientField::constant(&g, &isotropic(4, 6.0)).unwrap());
    }

    #[test]
    fn saturating_trace_decreases_with_strain() {
        // with m = nd = 2 and every entry equal to s, r = 2 s²; the trace
        // 4a + 4b(1 - r)/(1 + r)³ falls until r = 2 and recovers beyond
        let g = make_grid(1, 2, 3).unwrap();
        let sat = saturating_model(1.0, 0.4, 1.0, 1).unwrap();
        let mat = conic_combine(vec![Arc::new(sat)], vec![1.0], 1.0.into(), 1).unwrap();
        let trace = |s: f64| {
            let state = Field::from_values(&g, FieldShape::Matrix, vec![s; 6]).unwrap();
            let c = assemble_coefficients(&mat, &state).unwrap();
            c.at(0)[0] + c.at(0)[3]
        };
        let mut last = f64::INFINITY;
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let t = trace(s);
            assert!(t < last);
            let r = 2.0 * s * s;
            assert!((t - (4.0 + 1.6 * (1.0 - r) / (1.0 + r).powi(3))).abs() < 1e-13);
            last = t;
        }
        assert!(trace(3.0) > trace(1.0));
    }

    #[test]
    fn constants_formula() {
        let k = CordesConstants::evaluate(1.0, 0.5, 0.99, 2.0, 2.0, 2);
        assert!((k.c_alpha - 0.5 / 0.9).abs() < 1e-14);
        let q = CordesConstants::evaluate(1.3, 0.5, 0.5, 2.0, 2.0, 2);
        assert!((q.chat_inv_kappa - 2.0 * q.chat_inv_kappa_sq).abs() < 1e-14);
        let near_one = CordesConstants::evaluate(2.0, 0.25, epsilon_for_constants(1.0), 1.0, 1.0, 2);
        assert!((near_one.c_alpha - 0.5).abs() < 1e-5);
    }

    #[test]
    fn failing_report_blocks_constants() {
        let g = make_grid(2, 1, 4).unwrap();
        let c = CoefficientField::constant(&g, &[1.0, 0.0, 0.0, -0.5]).unwrap();
        let r = check_cordes(&c).unwrap();
        assert!(!r.pass);
        let q = quadratic_model(1.0, 2).unwrap();
        let mat = conic_combine(vec![Arc::new(q)], vec![1.0], 1.0.into(), 2).unwrap();
        assert!(matches!(cordes_constants(&r, 1.0, &mat), Err(Error::CordesFailed(_))));
    }
}
