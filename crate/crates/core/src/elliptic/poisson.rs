use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Outcome of a conjugate-gradient Poisson solve.
#[derive(Debug, Clone)]
pub struct PoissonSolve {
    pub solution: Field,
    /// Largest iteration count over components.
    pub iterations: usize,
    /// Largest `‖r‖ / ‖rhs‖` over components at exit.
    pub relative_residual: f64,
}

/// `-Δ_h` on one component (symmetric positive definite).
fn apply_neg_laplacian(grid: &Grid, v: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let r = grid.resolution();
    match grid.dim() {
        1 => {
            for i in 0..r {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < r { v[i + 1] } else { 0.0 };
                out[i] = (2.0 * v[i] - left - right) * inv_h2;
            }
        }
        _ => {
            for i in 0..r {
                for j in 0..r {
                    let p = i * r + j;
                    let mut acc = 4.0 * v[p];
                    if i > 0 {
                        acc -= v[p - r];
                    }
                    if i + 1 < r {
                        acc -= v[p + r];
                    }
                    if j > 0 {
                        acc -= v[p - 1];
                    }
                    if j + 1 < r {
                        acc -= v[p + 1];
                    }
                    out[p] = acc * inv_h2;
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `-Δ_h u = b` for one component; returns (iterations, relative residual).
fn cg_component(grid: &Grid, b: &[f64], u: &mut [f64], tol: f64) -> Result<(usize, f64)> {
    let np = b.len();
    let bnorm = dot(b, b).sqrt();
    u.iter_mut().for_each(|v| *v = 0.0);
    if bnorm == 0.0 {
        return Ok((0, 0.0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; np];
    let mut rr = dot(&r, &r);
    let cap = 10 * np + 100;
    for it in 1..=cap {
        apply_neg_laplacian(grid, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..np {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok((it, rel));
        }
        let beta = rr_new / rr;
        for i in 0..np {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        what: "conjugate gradients",
        iterations: cap,
        residual: rr.sqrt() / bnorm,
    })
}

/// Solves `Δ_h u = rhs` component-wise with zero Dirichlet data.
pub fn poisson_solve(rhs: &Field, tol: f64) -> Result<Field> {
    Ok(poisson_solve_detailed(rhs, tol)?.solution)
}

/// [`poisson_solve`] with iteration diagnostics.
pub fn poisson_solve_detailed(rhs: &Field, tol: f64) -> Result<PoissonSolve> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if !rhs.is_finite() {
        return Err(Error::NonFinite("Poisson right-hand side".into()));
    }
    let grid = *rhs.grid();
    let mut solution = Field::zeros(&grid, rhs.shape());
    let mut iterations = 0;
    let mut relative_residual: f64 = 0.0;
    for c in 0..rhs.ncomp() {
        let b: Vec<f64> = rhs.component(c).iter().map(|v| -v).collect();
        let (it, rel) = cg_component(&grid, &b, solution.component_mut(c), tol)?;
        iterations = iterations.max(it);
        relative_residual = relative_residual.max(rel);
    }
    Ok(PoissonSolve {
        solution,
        iterations,
        relative_residual,
    })
}
