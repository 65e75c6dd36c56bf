use serde::Serialize;

use super::poisson::poisson_solve;
use crate::cordes::{CoefficientField, CordesReport};
use crate::error::{Error, Result};
use crate::grid::{colocated_second_derivative, laplacian, Field, FieldShape, NormInput, NormKind};

/// Relative tolerance of the inner Poisson solves.
const POISSON_TOL: f64 = 1e-13;
/// Extra iterations beyond the a-priori contraction count.
const CAP_MARGIN: usize = 25;

/// `(Lu)_k = Σ_{l,i,j} a_{klij} ∂_{lj} u_i`.
pub fn apply_l(coeffs: &CoefficientField, u: &Field) -> Result<Field> {
    let grid = *u.grid();
    if coeffs.grid() != &grid || u.shape() != FieldShape::Vector {
        return Err(Error::ShapeMismatch(
            "coefficients and displacement live on different grids".into(),
        ));
    }
    let (n, d) = (grid.components(), grid.dim());
    let m = n * d;
    // second differences ∂_{lj} u_i, indexed by (i, l, j)
    let mut second = Vec::with_capacity(n * d * d);
    for i in 0..n {
        for l in 0..d {
            for j in 0..d {
                second.push(colocated_second_derivative(&grid, u.component(i), l, j));
            }
        }
    }
    let mut out = Field::zeros(&grid, FieldShape::Vector);
    for p in 0..grid.num_points() {
        let a = coeffs.at(p);
        for k in 0..n {
            let mut acc = 0.0;
            for l in 0..d {
                let row = (k * d + l) * m;
                for i in 0..n {
                    for j in 0..d {
                        acc += a[row + i * d + j] * second[(i * d + l) * d + j][p];
                    }
                }
            }
            out.set(p, k, acc);
        }
    }
    Ok(out)
}

/// Output of [`fixed_point_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointResult {
    #[serde(skip)]
    pub solution: Field,
    pub iterations: usize,
    /// `‖w_{m+1} - w_m‖ / ‖w_m - w_{m-1}‖` in the pure second-derivative norm.
    pub contraction_estimates: Vec<f64>,
    /// `√(1 - ε)` for the ε of the Cordes report.
    pub contraction_bound: f64,
    /// `‖L u - f‖_{L²}`.
    pub residual: f64,
    /// Last step size `‖w_{m+1} - w_m‖`.
    pub step: f64,
}

impl FixedPointResult {
    pub fn max_contraction(&self) -> f64 {
        self.contraction_estimates.iter().copied().fold(0.0, f64::max)
    }
}

fn w22(f: &Field) -> f64 {
    crate::grid::norm(NormInput::Field(f), NormKind::W22Gamma0, None).unwrap_or(f64::NAN)
}

/// Picard iteration `Δ w_{m+1} = α f + Δ w_m - α L w_m` from `w_0 = 0`,
/// stopped once `‖w_{m+1} - w_m‖_{W22} ≤ tol`.
pub fn fixed_point_solve(
    coeffs: &CoefficientField,
    f: &Field,
    report: &CordesReport,
    tol: f64,
) -> Result<FixedPointResult> {
    if !report.pass {
        return Err(Error::CordesFailed(format!(
            "cannot iterate: inf epsilon = {:e}",
            report.epsilon_inf
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let grid = *f.grid();
    if coeffs.grid() != &grid || report.alpha.len() != grid.num_points() {
        return Err(Error::ShapeMismatch("coefficients, report and rhs disagree".into()));
    }
    let alpha = &report.alpha;
    let scale_by_alpha = |v: &Field| {
        let mut out = v.clone();
        for c in 0..out.ncomp() {
            for (o, a) in out.component_mut(c).iter_mut().zip(alpha) {
                *o *= a;
            }
        }
        out
    };
    let alpha_f = scale_by_alpha(f);
    let mut w = poisson_solve(&alpha_f, POISSON_TOL)?;
    let mut step = w22(&w);
    let q = report.contraction_bound();
    let cap = if step <= tol {
        1
    } else {
        let needed = (tol / step).ln() / q.max(1e-300).ln();
        needed.ceil().max(0.0) as usize + CAP_MARGIN
    };
    let mut iterations = 1;
    let mut contraction_estimates = Vec::new();
    while step > tol {
        if iterations >= cap {
            return Err(Error::NotConverged {
                what: "fixed-point iteration",
                iterations,
                residual: step,
            });
        }
        let mut rhs = alpha_f.clone();
        rhs.axpy(1.0, &laplacian(&w))?;
        rhs.axpy(-1.0, &scale_by_alpha(&apply_l(coeffs, &w)?))?;
        let next = poisson_solve(&rhs, POISSON_TOL)?;
        let new_step = w22(&next.sub(&w)?);
        contraction_estimates.push(new_step / step);
        step = new_step;
        w = next;
        iterations += 1;
    }
    let mut res = apply_l(coeffs, &w)?;
    res.axpy(-1.0, f)?;
    Ok(FixedPointResult {
        solution: w,
        iterations,
        contraction_estimates,
        contraction_bound: q,
        residual: res.l2(),
        step,
    })
}

/// Comparison of `‖u‖_{H²}` with `C(α) ‖f‖_{L²}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct H2EstimateReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / (rhs + 1e-12)`.
    pub margin: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Checks `‖u‖_{H²} ≤ (1 + slack) C(α) ‖f‖_{L²}`.
pub fn verify_h2_estimate(result: &FixedPointResult, f: &Field, c_alpha: f64, slack: f64) -> H2EstimateReport {
    let lhs = result.solution.h2();
    let rhs = c_alpha * f.l2();
    H2EstimateReport {
        lhs,
        rhs,
        margin: (rhs - lhs) / (rhs + 1e-12),
        slack,
        pass: lhs <= (1.0 + slack) * rhs,
    }
}
