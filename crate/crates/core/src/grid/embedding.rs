//! Discrete embedding constant and the Miranda–Talenti check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::norm::w22_component_sq;
use super::ops::{divergence, jacobian, laplacian};
use super::{Field, FieldShape, Grid};
use crate::elliptic::poisson_solve;
use crate::error::{Error, Result};

const KHAT_SEED: u64 = 0x6b68_6174;
const KHAT_MAX_ITER: usize = 500;
const KHAT_TOL: f64 = 1e-11;
const INNER_TOL: f64 = 1e-13;

/// `K̂` with the default power-iteration seed.
pub fn estimate_khat(grid: &Grid, n: usize) -> Result<f64> {
    estimate_khat_with_seed(grid, n, KHAT_SEED)
}

/// Smallest `K̂ ≥ 1` with `‖f‖_{H²} ≤ K̂ ‖f‖_{W22}` on the lattice.
///
/// Since `‖f‖_{W22} = ‖Δ_h f‖`, the quotient `(‖f‖² + ‖Jf‖²) / ‖f‖²_{W22}` is
/// the top eigenvalue of `Δ⁻¹ (I − div J) Δ⁻¹`, found by power iteration.
pub fn estimate_khat_with_seed(grid: &Grid, n: usize, seed: u64) -> Result<f64> {
    let grid = grid.with_components(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * grid.num_points())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut v = Field::from_values(&grid, FieldShape::Vector, data)?;
    v = v.scaled(1.0 / v.l2());
    let mut residual = f64::INFINITY;
    for _ in 0..KHAT_MAX_ITER {
        let mv = apply_quotient_operator(&v)?;
        let lambda = mv.inner(&v)?;
        let mut r = mv.clone();
        r.axpy(-lambda, &v)?;
        residual = r.l2() / mv.l2();
        let norm = mv.l2();
        v = mv.scaled(1.0 / norm);
        if residual <= KHAT_TOL {
            return Ok((1.0 + lambda.max(0.0)).sqrt());
        }
    }
    Err(Error::NotConverged {
        what: "embedding power iteration",
        iterations: KHAT_MAX_ITER,
        residual,
    })
}

fn apply_quotient_operator(v: &Field) -> Result<Field> {
    let w = poisson_solve(v, INNER_TOL)?;
    let mut g = w.clone();
    g.axpy(-1.0, &divergence(&jacobian(&w)?)?)?;
    poisson_solve(&g, INNER_TOL)
}

/// `Σ_{lj} ‖∂_{lj} v‖² / ‖Δ_h v‖²`, summed over components.
pub fn miranda_talenti_ratio(v: &Field) -> f64 {
    let num: f64 = (0..v.ncomp())
        .map(|c| w22_component_sq(v.grid(), v.component(c)))
        .sum();
    let den = laplacian(v).l2().powi(2);
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Random smooth vector field with zero boundary values: a sum of sine
/// modes up to `max_mode` per axis with coefficients decaying like `|k|^-2`.
pub fn random_trig_field<R: Rng>(grid: &Grid, rng: &mut R, max_mode: usize) -> Field {
    let d = grid.dim();
    let n = grid.components();
    let max_mode = max_mode.max(1);
    let terms = match d {
        1 => max_mode,
        _ => max_mode * max_mode,
    };
    let mut coeffs = vec![0.0; n * terms];
    for (t, c) in coeffs.iter_mut().enumerate() {
        let (k0, k1) = mode_of(t % terms, max_mode, d);
        let decay = (k0 * k0 + k1 * k1) as f64;
        *c = rng.random_range(-1.0..1.0) / decay;
    }
    let mut out = Field::zeros(grid, FieldShape::Vector);
    for p in 0..grid.num_points() {
        let x = grid.position(p);
        for t in 0..terms {
            let (k0, k1) = mode_of(t, max_mode, d);
            let mut basis = (std::f64::consts::PI * k0 as f64 * x[0]).sin();
            if d == 2 {
                basis *= (std::f64::consts::PI * k1 as f64 * x[1]).sin();
            }
            for c in 0..n {
                let cur = out.at(p, c);
                out.set(p, c, cur + coeffs[c * terms + t] * basis);
            }
        }
    }
    out
}

fn mode_of(t: usize, max_mode: usize, d: usize) -> (usize, usize) {
    match d {
        1 => (t + 1, 0),
        _ => (t / max_mode + 1, t % max_mode + 1),
    }
}

/// Outcome of [`check_miranda_talenti`].
#[derive(Debug, Clone, Serialize)]
pub struct MirandaTalentiReport {
    pub trials: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Allowed excess over one, `10 h^2`.
    pub tolerance: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Evaluates the Miranda–Talenti ratio on `trials` random trigonometric fields.
pub fn check_miranda_talenti(grid: &Grid, trials: usize, seed: u64) -> Result<MirandaTalentiReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let h = grid.spacing();
    let tolerance = 10.0 * h * h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..trials {
        let modes = rng.random_range(1..=8);
        let v = random_trig_field(grid, &mut rng, modes);
        let r = miranda_talenti_ratio(&v);
        max_ratio = max_ratio.max(r);
        min_ratio = min_ratio.min(r);
        if r > 1.0 + tolerance {
            violations += 1;
        }
    }
    Ok(MirandaTalentiReport {
        trials,
        max_ratio,
        min_ratio,
        tolerance,
        violations,
        pass: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    /// Dense oracle for d = 1: top eigenvalue of `A⁻¹ (I + DᵀD) A⁻¹` with
    /// `A` the three-point Laplacian and `D` the centred difference matrix.
    fn khat_1d_oracle(res: usize) -> f64 {
        use nalgebra::DMatrix;
        let h = 1.0 / (res as f64 + 1.0);
        let a = DMatrix::from_fn(res, res, |i, j| match i.abs_diff(j) {
            0 => -2.0 / (h * h),
            1 => 1.0 / (h * h),
            _ => 0.0,
        });
        let d = DMatrix::from_fn(res, res, |i, j| {
            if j == i + 1 {
                0.5 / h
            } else if i == j + 1 {
                -0.5 / h
            } else {
                0.0
            }
        });
        let ainv = a.try_inverse().unwrap();
        let inner = DMatrix::<f64>::identity(res, res) + d.transpose() * &d;
        let m = &ainv * inner * &ainv;
        let top = m.symmetric_eigen().eigenvalues.max();
        (1.0 + top).sqrt()
    }

    #[test]
    fn khat_matches_dense_oracle() {
        let g = make_grid(1, 2, 15).unwrap();
        let k = estimate_khat(&g, 2).unwrap();
        assert!((k - khat_1d_oracle(15)).abs() < 1e-9, "{k}");
        assert!(k >= 1.0);
    }

    #[test]
    fn khat_is_seed_independent_and_mesh_stable() {
        let g = make_grid(1, 2, 15).unwrap();
        let a = estimate_khat_with_seed(&g, 2, 1).unwrap();
        let b = estimate_khat_with_seed(&g, 2, 99).unwrap();
        assert!((a - b).abs() < 1e-8);
        let fine = estimate_khat(&make_grid(1, 2, 31).unwrap(), 2).unwrap();
        assert!((fine - a).abs() / a < 0.05);
    }

    #[test]
    fn eigenmode_ratio_is_one() {
        let g = make_grid(2, 1, 15).unwrap();
        let v = Field::from_fn(&g, FieldShape::Vector, |x, o| {
            o[0] = (PI * x[0]).sin() * (3.0 * PI * x[1]).sin();
        })
        .unwrap();
        assert!((miranda_talenti_ratio(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_fields_pass() {
        let g = make_grid(2, 1, 15).unwrap();
        let r = check_miranda_talenti(&g, 20, 3).unwrap();
        assert!(r.pass);
        assert!(r.max_ratio <= 1.0 + r.tolerance);
        assert!(check_miranda_talenti(&g, 0, 3).is_err());
    }
}
