//! Numerical checks of the stability estimates on a pair of trajectories.

use rayon::prelude::*;
use serde::Serialize;

use super::constants::{stability_constants, StabilityConstants};
use crate::cordes::{
    assemble_coefficients, check_cordes, check_dimension_condition, cordes_constants, CordesConstants,
    CordesReport,
};
use crate::dynamics::diagnostics::{check_axes, second_derivative_stats};
use crate::dynamics::{compute_u2, measure_apriori, second_time_derivative, ProblemInstance, Trajectory};
use crate::energy::ConicMaterial;
use crate::error::{Error, Result};
use crate::grid::{cell_jacobian, jacobian, time_derivative, trapezoid, Field};

/// Relative slack on every bound check.
pub const BOUND_SLACK: f64 = 0.05;

/// `(rhs - lhs) / (rhs + 1e-12)`.
pub fn margin(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / (rhs + 1e-12)
}

/// Size of the data perturbation between two problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationNorms {
    pub du0_h2: f64,
    pub du1_h1: f64,
    pub du1_l2_rho: f64,
    pub du0_jac: f64,
    pub du1_jac: f64,
    /// `∫ ‖δf‖ + ‖δḟ‖` over `[0, T]`.
    pub df_w11: f64,
    /// `‖δf(0)‖`.
    pub df0: f64,
    /// `|δα_K|` per model.
    pub d_alpha: Vec<f64>,
    /// `max_K |δα_K|`.
    pub d_alpha_max: f64,
    pub tilde_u0_h2: f64,
}

/// One inequality checked at every sampled time.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: &'static str,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub min_margin: f64,
    pub worst_time: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(name: &'static str, times: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>) -> Self {
        let (worst, min_margin) = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| margin(*l, *r))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, m)| if m < acc.1 { (i, m) } else { acc });
        BoundCheck {
            name,
            worst_time: times.get(worst).copied().unwrap_or(0.0),
            pass: min_margin >= -BOUND_SLACK,
            times,
            lhs,
            rhs,
            min_margin,
        }
    }
}

/// Worst Cordes data over the pair and the resulting constants.
#[derive(Debug, Clone, Serialize)]
pub struct PairCordes {
    pub report: CordesReport,
    pub constants: CordesConstants,
}

/// Everything measured on one base/perturbed pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub constants: StabilityConstants,
    pub norms: PerturbationNorms,
    pub cordes: PairCordes,
    pub v_bound: BoundCheck,
    pub z_bound: BoundCheck,
    pub h2_bound: BoundCheck,
    pub main: BoundCheck,
    /// The H¹ term enters the final estimate unsquared; exact only for `‖δu₁‖_{H¹} ≤ 1`.
    pub h1_small: bool,
    pub pass: bool,
}

/// Cordes condition for the base material along both trajectories.
///
/// The coefficients are evaluated at the Jacobian of every snapshot; the
/// snapshot with the smallest `ε` is reported.
pub fn pair_cordes(base: &Trajectory, perturbed: &Trajectory, khat: f64) -> Result<PairCordes> {
    check_axes(base, perturbed)?;
    let material = base.material();
    let dim = check_dimension_condition(material, base.grid().nd());
    if !dim.ok {
        return Err(Error::DimensionCondition(format!(
            "kappa = {} not in ({}, {})",
            dim.kappa, dim.lower, dim.upper
        )));
    }
    let reports: Vec<CordesReport> = base
        .snapshots()
        .par_iter()
        .chain(perturbed.snapshots().par_iter())
        .map(|u| check_cordes(&assemble_coefficients(material, &jacobian(u)?)?))
        .collect::<Result<_>>()?;
    let report = reports
        .into_iter()
        .min_by(|a, b| {
            (a.pass, a.epsilon_inf)
                .partial_cmp(&(b.pass, b.epsilon_inf))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("trajectories are never empty");
    let constants = cordes_constants(&report, khat, material)?;
    Ok(PairCordes { report, constants })
}

fn jac_norm(f: &Field) -> Result<f64> {
    Ok(cell_jacobian(f)?.l2())
}

fn alpha_difference(a: &ConicMaterial, b: &ConicMaterial) -> Result<Vec<f64>> {
    if a.alpha().len() != b.alpha().len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} models in the two materials",
            a.alpha().len(),
            b.alpha().len()
        )));
    }
    Ok(a.alpha().iter().zip(b.alpha()).map(|(x, y)| (x - y).abs()).collect())
}

/// Norms of `ũ₀ - u₀`, `ũ₁ - u₁`, `f̃ - f` and `α̃ - α`.
pub fn perturbation_norms(base: &Trajectory, perturbed: &Trajectory) -> Result<PerturbationNorms> {
    check_axes(base, perturbed)?;
    let (pa, pb) = (base.problem(), perturbed.problem());
    let rho = pa.density();
    let du0 = pb.u0().sub(pa.u0())?;
    let du1 = pb.u1().sub(pa.u1())?;
    let grid = base.grid();
    let (df, dfdot): (Vec<f64>, Vec<f64>) = (0..base.len())
        .into_par_iter()
        .map(|m| {
            let t = base.time(m);
            let f = pb.forcing().value(t, grid)?.sub(&pa.forcing().value(t, grid)?)?;
            let r = pb.forcing().rate(t, grid)?.sub(&pa.forcing().rate(t, grid)?)?;
            Ok((f.l2(), r.l2()))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    let w11: Vec<f64> = df.iter().zip(&dfdot).map(|(a, b)| a + b).collect();
    let d_alpha = alpha_difference(pa.material(), pb.material())?;
    Ok(PerturbationNorms {
        du0_h2: du0.h2(),
        du1_h1: du1.h1(),
        du1_l2_rho: du1.l2_rho(&rho)?,
        du0_jac: jac_norm(&du0)?,
        du1_jac: jac_norm(&du1)?,
        df_w11: trapezoid(&w11, base.dt()),
        df0: df[0],
        d_alpha_max: d_alpha.iter().copied().fold(0.0, f64::max),
        d_alpha,
        tilde_u0_h2: pb.u0().h2(),
    })
}

/// Per-sample norms of `v = ũ - u` and its time derivatives.
struct DifferenceSeries {
    times: Vec<f64>,
    vdot_l2: Vec<f64>,
    vdot_rho: Vec<f64>,
    vddot_l2: Vec<f64>,
    vddot_rho: Vec<f64>,
    v_jac: Vec<f64>,
    vdot_jac: Vec<f64>,
    v_h2: Vec<f64>,
    df_l2: Vec<f64>,
}

fn difference_series(base: &Trajectory, perturbed: &Trajectory) -> Result<DifferenceSeries> {
    let dt = base.dt();
    let grid = base.grid();
    let rho = base.problem().density();
    let v: Vec<Field> = base
        .snapshots()
        .par_iter()
        .zip(perturbed.snapshots())
        .map(|(a, b)| b.sub(a))
        .collect::<Result<_>>()?;
    let (pa, pb) = (base.problem(), perturbed.problem());
    let rows: Vec<[f64; 8]> = (0..v.len())
        .into_par_iter()
        .map(|m| {
            let vd = time_derivative(&v, dt, m)?;
            let vdd = second_time_derivative(&v, dt, m)?;
            let t = base.time(m);
            let df = pb.forcing().value(t, grid)?.sub(&pa.forcing().value(t, grid)?)?;
            Ok([
                vd.l2(),
                vd.l2_rho(&rho)?,
                vdd.l2(),
                vdd.l2_rho(&rho)?,
                jac_norm(&v[m])?,
                jac_norm(&vd)?,
                v[m].h2(),
                df.l2(),
            ])
        })
        .collect::<Result<_>>()?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    Ok(DifferenceSeries {
        times: (0..v.len()).map(|m| base.time(m)).collect(),
        vdot_l2: col(0),
        vdot_rho: col(1),
        vddot_l2: col(2),
        vddot_rho: col(3),
        v_jac: col(4),
        vdot_jac: col(5),
        v_h2: col(6),
        df_l2: col(7),
    })
}

fn running_max(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0f64, |s, x| {
            *s = s.max(*x);
            Some(*s)
        })
        .collect()
}

fn running_integral(v: &[f64], dt: f64) -> Vec<f64> {
    (0..v.len()).map(|m| trapezoid(&v[..=m], dt)).collect()
}

/// Energy estimate for `v`: `‖v̇‖²_ρ + κ ‖Jv‖²`.
fn check_v(c: &StabilityConstants, n: &PerturbationNorms, s: &DifferenceSeries, material: &ConicMaterial, dt: f64) -> BoundCheck {
    let (nn, d) = (c.n as f64, c.d as f64);
    let alpha_term: f64 = material
        .models()
        .iter()
        .zip(&n.d_alpha)
        .map(|(m, da)| {
            let b = m.bounds();
            da / c.rho_min * ((nn * c.volume).sqrt() * b.mu4 + d * nn * c.apriori.m0 * b.mu1) * d
        })
        .sum();
    let init = (n.du1_l2_rho.powi(2) + c.mu * n.du0_jac.powi(2)).sqrt();
    let lhs = (0..s.times.len())
        .map(|m| s.vdot_rho[m].powi(2) + c.kappa * s.v_jac[m].powi(2))
        .collect();
    let rhs = s
        .times
        .iter()
        .enumerate()
        .map(|(m, &tau)| {
            let weighted: Vec<f64> = (0..=m)
                .map(|j| s.df_l2[j] * (c.growth * (tau - s.times[j])).exp())
                .collect();
            let forcing = trapezoid(&weighted, dt);
            (c.exp_at(tau) * init + forcing + alpha_term * c.expm1_at(tau)).powi(2)
        })
        .collect();
    BoundCheck::new("v_energy", s.times.clone(), lhs, rhs)
}

/// Energy estimate for `z = v̇`: `‖v̈‖²_ρ + κ ‖Jv̇‖²`.
fn check_z(c: &StabilityConstants, n: &PerturbationNorms, s: &DifferenceSeries, dt: f64) -> BoundCheck {
    let sup_jac = running_max(&s.v_jac);
    let int_h2 = running_integral(&s.v_h2, dt);
    let fixed = c.c0 * n.du0_h2 + c.c1 * n.du1_jac + c.c2 * n.d_alpha_max + c.c5 * n.df_w11;
    let lhs = (0..s.times.len())
        .map(|m| s.vddot_rho[m].powi(2) + c.kappa * s.vdot_jac[m].powi(2))
        .collect();
    let rhs = (0..s.times.len())
        .map(|m| (fixed + c.c3 * sup_jac[m] + c.c4 * int_h2[m]).powi(2))
        .collect();
    BoundCheck::new("z_energy", s.times.clone(), lhs, rhs)
}

/// Second-derivative estimate `‖v(τ)‖_{H²}`.
fn check_h2(c: &StabilityConstants, n: &PerturbationNorms, s: &DifferenceSeries) -> BoundCheck {
    let sup_jac = running_max(&s.v_jac);
    let fixed = c.c0 * n.du0_h2 + c.c1 * n.du1_jac + c.c2_h2 * n.d_alpha_max + c.c5_h2 * n.df_w11;
    let rhs = s
        .times
        .iter()
        .zip(&sup_jac)
        .map(|(tau, sj)| (c.cbar * c.c4 * tau).exp() * c.chat * (fixed + c.c3_h2 * sj))
        .collect();
    BoundCheck::new("h2", s.times.clone(), s.v_h2.clone(), rhs)
}

/// The final estimate with `C̄₀, C̄₁, C̄₂`.
fn check_main(c: &StabilityConstants, n: &PerturbationNorms, s: &DifferenceSeries) -> BoundCheck {
    // Both the squared and the unsquared H¹ term are covered.
    let h1 = n.du1_h1.max(n.du1_h1 * n.du1_h1);
    let q = (c.mu * n.du0_h2 * n.du0_h2 + h1).sqrt();
    let bound = super::constants::times(c.cbar0, q)
        + super::constants::times(c.cbar1, n.df_w11)
        + super::constants::times(c.cbar2, n.d_alpha_max);
    let lhs = (0..s.times.len())
        .map(|m| {
            (s.vdot_l2[m].powi(2)
                + c.kappa * s.v_jac[m].powi(2)
                + s.vddot_l2[m].powi(2)
                + c.kappa * s.vdot_jac[m].powi(2)
                + s.v_h2[m].powi(2))
            .sqrt()
        })
        .collect();
    BoundCheck::new("main", s.times.clone(), lhs, vec![bound; s.times.len()])
}

/// Constants, norms and all four checks for `base` against `perturbed`.
///
/// Constants use the base material's `α`; the a-priori bounds are the maxima
/// over both trajectories.
pub fn verify_pair(base: &Trajectory, perturbed: &Trajectory, khat: f64) -> Result<PairReport> {
    let cordes = pair_cordes(base, perturbed, khat)?;
    let apriori = measure_apriori(base, perturbed)?;
    let norms = perturbation_norms(base, perturbed)?;
    let constants = stability_constants(
        base.material(),
        &apriori,
        base.grid(),
        base.problem().final_time(),
        &cordes.constants,
        norms.tilde_u0_h2,
    )?;
    let series = difference_series(base, perturbed)?;
    let dt = base.dt();
    let v_bound = check_v(&constants, &norms, &series, base.material(), dt);
    let z_bound = check_z(&constants, &norms, &series, dt);
    let h2_bound = check_h2(&constants, &norms, &series);
    let main = check_main(&constants, &norms, &series);
    let pass = v_bound.pass && z_bound.pass && h2_bound.pass && main.pass;
    Ok(PairReport {
        h1_small: norms.du1_h1 <= 1.0,
        constants,
        norms,
        cordes,
        v_bound,
        z_bound,
        h2_bound,
        main,
        pass,
    })
}

/// Bound on `‖ũ₂ - u₂‖` at `t = 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct U2Check {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Compares the initial accelerations of two problems with their data bound.
pub fn verify_u2_bound(base: &ProblemInstance, perturbed: &ProblemInstance) -> Result<U2Check> {
    if base.grid() != perturbed.grid() {
        return Err(Error::ShapeMismatch("problems live on different grids".into()));
    }
    let grid = base.grid();
    let material = base.material();
    let (n, d) = (grid.components() as f64, grid.dim() as f64);
    let nd = n * d;
    let vol = grid.volume();
    let lhs = compute_u2(perturbed)?.sub(&compute_u2(base)?)?.l2();
    let d_alpha = alpha_difference(material, perturbed.material())?;
    let m3 = second_derivative_stats(base.u0()).1.max(second_derivative_stats(perturbed.u0()).1);
    let du0 = perturbed.u0().sub(base.u0())?.h2();
    let df0 = perturbed
        .forcing()
        .value(0.0, grid)?
        .sub(&base.forcing().value(0.0, grid)?)?
        .l2();
    let tilde_h2 = perturbed.u0().h2();
    let alpha_term: f64 = material
        .models()
        .iter()
        .zip(&d_alpha)
        .map(|(m, da)| {
            let b = m.bounds();
            da * ((6.0 * vol).sqrt() * n.sqrt() * d * b.mu4 + 6.0f64.sqrt() * nd * b.mu1 * tilde_h2)
        })
        .sum();
    let data_term = 3.0
        * nd
        * material.weighted_bound(|b| d.sqrt() * b.mu5 + b.mu1 + n * d.powf(1.5) * m3 * b.mu2)
        * du0;
    let rhs = alpha_term + data_term + 3.0f64.sqrt() * material.rho_max() * df0;
    let mg = margin(lhs, rhs);
    Ok(U2Check {
        lhs,
        rhs,
        margin: mg,
        pass: mg >= -BOUND_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, Forcing, ProfileTerm, VectorProfile};
    use crate::energy::{conic_combine, quadratic_model, saturating_model, SpatialCoefficient, StoredEnergy};
    use crate::grid::{estimate_khat, make_grid, FieldShape, Grid};
    use std::sync::Arc;

    fn material(alpha: Vec<f64>) -> ConicMaterial {
        let s: Arc<dyn StoredEnergy> = Arc::new(saturating_model(0.5, 0.2, 1.0, 1).unwrap());
        let q: Arc<dyn StoredEnergy> = Arc::new(quadratic_model(0.5, 1).unwrap());
        conic_combine(vec![s, q], alpha, SpatialCoefficient::constant(1.0), 1).unwrap()
    }

    fn sine(g: &Grid, comp: usize, amp: f64, mode: usize) -> Field {
        VectorProfile::new(vec![ProfileTerm::sine(comp, amp, vec![mode])])
            .sample(g)
            .unwrap()
    }

    fn problem(g: &Grid, alpha: Vec<f64>, amp: f64) -> ProblemInstance {
        let u0 = sine(g, 0, amp, 1).add(&sine(g, 1, 0.5 * amp, 2)).unwrap();
        let u1 = sine(g, 1, 0.3 * amp, 1);
        ProblemInstance::new(material(alpha), u0, u1, Forcing::Zero, 0.25).unwrap()
    }

    #[test]
    fn identical_pair_has_zero_perturbation() {
        let g = make_grid(1, 2, 15).unwrap();
        let tr = simulate(&problem(&g, vec![1.0, 0.6], 0.05)).unwrap();
        let khat = estimate_khat(&g, 2).unwrap();
        let r = verify_pair(&tr, &tr, khat).unwrap();
        assert_eq!(r.norms.du0_h2, 0.0);
        assert_eq!(r.norms.d_alpha_max, 0.0);
        assert!(r.main.lhs.iter().all(|v| *v == 0.0));
        assert!(r.pass);
    }

    #[test]
    fn small_perturbation_passes_all_checks() {
        let g = make_grid(1, 2, 15).unwrap();
        let khat = estimate_khat(&g, 2).unwrap();
        let a = simulate(&problem(&g, vec![1.0, 0.6], 0.05)).unwrap();
        let b = simulate(&problem(&g, vec![1.005, 0.6], 0.051)).unwrap();
        let r = verify_pair(&a, &b, khat).unwrap();
        for c in [&r.v_bound, &r.z_bound, &r.h2_bound, &r.main] {
            assert!(c.pass, "{} failed with margin {}", c.name, c.min_margin);
        }
        assert!(r.norms.d_alpha_max > 0.0 && r.norms.du0_h2 > 0.0);
    }

    #[test]
    fn u2_bound_holds_for_data_perturbation() {
        let g = make_grid(1, 2, 31).unwrap();
        let a = problem(&g, vec![1.0, 0.6], 0.05);
        let b = problem(&g, vec![1.0, 0.62], 0.052);
        let c = verify_u2_bound(&a, &b).unwrap();
        assert!(c.lhs > 0.0);
        assert!(c.pass, "{c:?}");
        let same = verify_u2_bound(&a, &a).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
    }

    #[test]
    fn mismatched_model_counts_are_rejected() {
        let g = make_grid(1, 2, 15).unwrap();
        let a = problem(&g, vec![1.0, 0.6], 0.05);
        let q: Arc<dyn StoredEnergy> = Arc::new(quadratic_model(0.5, 1).unwrap());
        let single = conic_combine(vec![q], vec![1.0], SpatialCoefficient::constant(1.0), 1).unwrap();
        let b = a
            .with_data(single, a.u0().clone(), a.u1().clone(), Forcing::Zero)
            .unwrap();
        assert!(verify_u2_bound(&a, &b).is_err());
        let z = Field::zeros(&g, FieldShape::Vector);
        assert_eq!(z.l2(), 0.0);
    }

    #[test]
    fn margin_sign() {
        assert!(margin(1.0, 2.0) > 0.0);
        assert!(margin(2.0, 1.0) < 0.0);
        assert_eq!(margin(0.0, 0.0), 0.0);
    }
}
