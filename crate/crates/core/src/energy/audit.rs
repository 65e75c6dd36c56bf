//! Sampling checks of bound tables and analytic derivatives.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{BoundsTable, StoredEnergy};
use crate::error::{Error, Result};

/// Entries of sampled `Y` are uniform in `[-Y_RANGE, Y_RANGE]`.
const Y_RANGE: f64 = 3.0;
const FD_STEP_PREMISE: f64 = 1e-5;

/// Worst observed margin of each bound (negative means violated).
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub samples: usize,
    /// `(bound name, min over samples of bound - observed)`, normalised so that
    /// the growth bounds compare `C / ‖Y‖²` and the Hessian bounds compare
    /// extreme eigenvalues.
    pub margins: Vec<(String, f64)>,
    pub violations: Vec<String>,
    /// Largest `|H_ab - H_ba|`.
    pub symmetry_residual: f64,
    /// Relative mismatch between `∂_Y (∂_x ∂_Y C)` by differences and `∂_x ∂_Y ∂_Y C`.
    pub mixed_residual: f64,
    pub pass: bool,
}

fn draw<R: Rng>(rng: &mut R, d: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let x = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
    let y = (0..m).map(|_| rng.random_range(-Y_RANGE..Y_RANGE)).collect();
    (x, y)
}

fn max_abs_where(t: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    t.iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .fold(0.0, |m, (_, v)| m.max(v.abs()))
}

/// Checks the model's own bound table.
pub fn verify_bounds(model: &dyn StoredEnergy, n: usize, d: usize, samples: usize, seed: u64) -> Result<BoundsReport> {
    verify_bounds_against(model, model.bounds(), n, d, samples, seed)
}

/// Checks `table` against sampled evaluations of `model` (useful for
/// user-supplied or deliberately corrupted tables).
pub fn verify_bounds_against(
    model: &dyn StoredEnergy,
    table: &BoundsTable,
    n: usize,
    d: usize,
    samples: usize,
    seed: u64,
) -> Result<BoundsReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let m = n * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [f64::INFINITY; 10];
    let mut hess = vec![0.0; m * m];
    let mut third = vec![0.0; m * m * m];
    let mut fourth = vec![0.0; m * m * m * m];
    let mut gxgy = vec![0.0; d * m];
    let mut gxh = vec![0.0; d * m * m];
    let mut gxt = vec![0.0; d * m * m * m];
    let mut symmetry_residual: f64 = 0.0;
    let mut mixed_residual: f64 = 0.0;
    for _ in 0..samples {
        let (x, y) = draw(&mut rng, d, m);
        let q: f64 = y.iter().map(|v| v * v).sum();
        let c = model.energy(&x, &y);
        if q > 0.0 {
            worst[0] = worst[0].min(c / q - table.kappa0);
            worst[1] = worst[1].min(table.mu0 - c / q);
        }
        model.hess_yy(&x, &y, &mut hess);
        for a in 0..m {
            for b in 0..m {
                symmetry_residual = symmetry_residual.max((hess[a * m + b] - hess[b * m + a]).abs());
            }
        }
        let eig = DMatrix::from_row_slice(m, m, &hess).symmetric_eigen().eigenvalues;
        worst[2] = worst[2].min(eig.min() - table.kappa1);
        worst[3] = worst[3].min(table.mu1 - eig.max());
        model.third_y(&x, &y, &mut third);
        worst[4] = worst[4].min(table.mu2 - max_abs_where(&third, |_| true));
        model.fourth_y(&x, &y, &mut fourth);
        worst[5] = worst[5].min(table.mu3 - max_abs_where(&fourth, |_| true));

        // entries whose spatial axis matches the column index of Y_{kl}
        model.grad_x_grad_y(&x, &y, &mut gxgy);
        worst[6] = worst[6].min(table.mu4 - max_abs_where(&gxgy, |i| i / m == (i % m) % d));
        model.grad_x_hess_y(&x, &y, &mut gxh);
        let mixed = max_abs_where(&gxh, |i| i / (m * m) == (i % m) % d);
        worst[7] = worst[7].min(table.mu5 - mixed);
        worst[8] = worst[8].min(table.mu6 - mixed);
        model.grad_x_third_y(&x, &y, &mut gxt);
        worst[9] = worst[9].min(table.mu7 - max_abs_where(&gxt, |i| i / (m * m * m) == (i % m) % d));

        mixed_residual = mixed_residual.max(mixed_partial_residual(model, &x, &y, &gxh));
    }
    let names = ["kappa0", "mu0", "kappa1", "mu1", "mu2", "mu3", "mu4", "mu5", "mu6", "mu7"];
    let bounds = [
        table.kappa0, table.mu0, table.kappa1, table.mu1, table.mu2, table.mu3, table.mu4,
        table.mu5, table.mu6, table.mu7,
    ];
    let mut violations = Vec::new();
    for ((name, margin), bound) in names.iter().zip(worst).zip(bounds) {
        if margin < -1e-10 * bound.abs().max(1.0) {
            violations.push(format!("{name}: exceeded by {:.3e}", -margin));
        }
    }
    if symmetry_residual > 1e-12 {
        violations.push(format!("Hessian asymmetry {symmetry_residual:.3e}"));
    }
    if mixed_residual > 1e-5 {
        violations.push(format!("mixed partials disagree by {mixed_residual:.3e}"));
    }
    Ok(BoundsReport {
        samples,
        margins: names.iter().map(|s| s.to_string()).zip(worst).collect(),
        pass: violations.is_empty(),
        violations,
        symmetry_residual,
        mixed_residual,
    })
}

/// Compares `∂_{Y_b}` of `∂_x ∂_{Y_a} C` (central differences) with the
/// analytic `∂_x ∂_{Y_a} ∂_{Y_b} C`; relative to the tensor's largest entry.
fn mixed_partial_residual(model: &dyn StoredEnergy, x: &[f64], y: &[f64], gxh: &[f64]) -> f64 {
    let (d, m) = (x.len(), y.len());
    let mut plus = vec![0.0; d * m];
    let mut minus = vec![0.0; d * m];
    let mut yp = y.to_vec();
    let scale = max_abs_where(gxh, |_| true).max(1e-8);
    let mut worst: f64 = 0.0;
    for b in 0..m {
        yp[b] = y[b] + FD_STEP_PREMISE;
        model.grad_x_grad_y(x, &yp, &mut plus);
        yp[b] = y[b] - FD_STEP_PREMISE;
        model.grad_x_grad_y(x, &yp, &mut minus);
        yp[b] = y[b];
        for q in 0..d {
            for a in 0..m {
                let fd = (plus[q * m + a] - minus[q * m + a]) / (2.0 * FD_STEP_PREMISE);
                worst = worst.max((fd - gxh[(q * m + a) * m + b]).abs() / scale);
            }
        }
    }
    worst
}

/// Largest relative error of each analytic derivative against central
/// differences of the next-lower analytic derivative.
#[derive(Debug, Clone, Serialize)]
pub struct FdAuditReport {
    pub samples: usize,
    pub step: f64,
    pub grad: f64,
    pub hess: f64,
    pub third: f64,
    pub fourth: f64,
    pub grad_x_grad_y: f64,
    pub grad_x_hess: f64,
    pub grad_x_third: f64,
}

impl FdAuditReport {
    pub fn worst(&self) -> f64 {
        [
            self.grad,
            self.hess,
            self.third,
            self.fourth,
            self.grad_x_grad_y,
            self.grad_x_hess,
            self.grad_x_third,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

type Eval<'a> = &'a dyn Fn(&[f64], &[f64], &mut [f64]);

/// Error of `analytic` (length `len * m` or `len * d`) against central
/// differences of `lower` (length `len`) in the Y or x variables.
fn fd_error(
    x: &[f64],
    y: &[f64],
    len: usize,
    lower: Eval<'_>,
    analytic: &[f64],
    in_x: bool,
    step: f64,
) -> f64 {
    let vars = if in_x { x.len() } else { y.len() };
    let mut plus = vec![0.0; len];
    let mut minus = vec![0.0; len];
    let scale = max_abs_where(analytic, |_| true).max(1e-8);
    let mut worst: f64 = 0.0;
    let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
    for v in 0..vars {
        {
            let target = if in_x { &mut xp } else { &mut yp };
            target[v] += step;
        }
        lower(&xp, &yp, &mut plus);
        {
            let target = if in_x { &mut xp } else { &mut yp };
            target[v] -= 2.0 * step;
        }
        lower(&xp, &yp, &mut minus);
        {
            let (target, orig) = if in_x { (&mut xp, x) } else { (&mut yp, y) };
            target[v] = orig[v];
        }
        for e in 0..len {
            let fd = (plus[e] - minus[e]) / (2.0 * step);
            // Y-derivatives append the new index last; x-derivatives lead with it
            let idx = if in_x { v * len + e } else { e * vars + v };
            worst = worst.max((fd - analytic[idx]).abs() / scale);
        }
    }
    worst
}

/// Central-difference audit of every analytic derivative at `samples` random points.
pub fn finite_diff_audit(
    model: &dyn StoredEnergy,
    n: usize,
    d: usize,
    samples: usize,
    step: f64,
    seed: u64,
) -> Result<FdAuditReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let m = n * d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = FdAuditReport {
        samples,
        step,
        grad: 0.0,
        hess: 0.0,
        third: 0.0,
        fourth: 0.0,
        grad_x_grad_y: 0.0,
        grad_x_hess: 0.0,
        grad_x_third: 0.0,
    };
    let energy = |x: &[f64], y: &[f64], o: &mut [f64]| o[0] = model.energy(x, y);
    let grad = |x: &[f64], y: &[f64], o: &mut [f64]| model.grad_y(x, y, o);
    let hess = |x: &[f64], y: &[f64], o: &mut [f64]| model.hess_yy(x, y, o);
    let third = |x: &[f64], y: &[f64], o: &mut [f64]| model.third_y(x, y, o);
    for _ in 0..samples {
        let (x, mut y) = draw(&mut rng, d, m);
        // keep x away from the box edges so that x ± step stays inside
        let x: Vec<f64> = x.iter().map(|v| 0.05 + 0.9 * v).collect();
        y.iter_mut().for_each(|v| *v /= Y_RANGE / 2.0);
        let mut g = vec![0.0; m];
        let mut h = vec![0.0; m * m];
        let mut t = vec![0.0; m * m * m];
        let mut f = vec![0.0; m * m * m * m];
        let mut gx = vec![0.0; d * m];
        let mut hx = vec![0.0; d * m * m];
        let mut tx = vec![0.0; d * m * m * m];
        model.grad_y(&x, &y, &mut g);
        model.hess_yy(&x, &y, &mut h);
        model.third_y(&x, &y, &mut t);
        model.fourth_y(&x, &y, &mut f);
        model.grad_x_grad_y(&x, &y, &mut gx);
        model.grad_x_hess_y(&x, &y, &mut hx);
        model.grad_x_third_y(&x, &y, &mut tx);
        rep.grad = rep.grad.max(fd_error(&x, &y, 1, &energy, &g, false, step));
        rep.hess = rep.hess.max(fd_error(&x, &y, m, &grad, &h, false, step));
        rep.third = rep.third.max(fd_error(&x, &y, m * m, &hess, &t, false, step));
        rep.fourth = rep.fourth.max(fd_error(&x, &y, m * m * m, &third, &f, false, step));
        rep.grad_x_grad_y = rep.grad_x_grad_y.max(fd_error(&x, &y, m, &grad, &gx, true, step));
        rep.grad_x_hess = rep.grad_x_hess.max(fd_error(&x, &y, m * m, &hess, &hx, true, step));
        rep.grad_x_third = rep.grad_x_third.max(fd_error(&x, &y, m * m * m, &third, &tx, true, step));
    }
    Ok(rep)
}
