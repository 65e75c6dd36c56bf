//! A-priori bound measurement and the energy inequality along a trajectory.

use rayon::prelude::*;
use serde::Serialize;

use super::Trajectory;
use crate::energy::ConicMaterial;
use crate::error::{Error, Result};
use crate::grid::{cell_jacobian, colocated_second_derivative, jacobian, trapezoid, Field};

/// Relative slack allowed on the energy inequality.
pub const ENERGY_SLACK: f64 = 0.05;

/// `M₀ … M₃` measured over one or two trajectories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AprioriBounds {
    /// `max_t max_{l,j} ‖∂_l ∂_j u‖_{L²}`.
    pub m0: f64,
    /// `sup |∂_l u̇_k|`.
    pub m1: f64,
    /// `sup |∂_l ∂_j u̇_k|`.
    pub m2: f64,
    /// `sup |∂_l ∂_j u_k|`.
    pub m3: f64,
}

impl AprioriBounds {
    pub fn max(self, other: AprioriBounds) -> AprioriBounds {
        AprioriBounds {
            m0: self.m0.max(other.m0),
            m1: self.m1.max(other.m1),
            m2: self.m2.max(other.m2),
            m3: self.m3.max(other.m3),
        }
    }
}

/// `(max_{l,j} ‖∂_lj f‖_{L²}, sup |∂_lj f_k|)`.
pub(crate) fn second_derivative_stats(f: &Field) -> (f64, f64) {
    let grid = f.grid();
    let d = grid.dim();
    let vol = grid.cell_volume();
    let mut l2 = 0.0f64;
    let mut sup = 0.0f64;
    for l in 0..d {
        for j in l..d {
            let mut sq = 0.0;
            for k in 0..f.ncomp() {
                let v = colocated_second_derivative(grid, f.component(k), l, j);
                sq += v.iter().map(|x| x * x).sum::<f64>();
                sup = v.iter().fold(sup, |s, x| s.max(x.abs()));
            }
            l2 = l2.max((sq * vol).sqrt());
        }
    }
    (l2, sup)
}

/// Sup of the first derivatives, over both the centred and the cell Jacobian.
fn first_derivative_sup(f: &Field) -> Result<f64> {
    let centred = jacobian(f)?.max_abs();
    let cell = cell_jacobian(f)?
        .values()
        .iter()
        .fold(0.0f64, |s, x| s.max(x.abs()));
    Ok(centred.max(cell))
}

fn apriori_single(tr: &Trajectory) -> Result<AprioriBounds> {
    (0..tr.len())
        .into_par_iter()
        .map(|m| {
            let (m0, m3) = second_derivative_stats(tr.snapshot(m));
            let v = tr.velocity(m)?;
            let m1 = first_derivative_sup(&v)?;
            let (_, m2) = second_derivative_stats(&v);
            Ok(AprioriBounds { m0, m1, m2, m3 })
        })
        .try_reduce(AprioriBounds::default, |a, b| Ok(a.max(b)))
}

/// Checks that two trajectories share grid and time axis.
pub(crate) fn check_axes(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch("trajectories live on different grids".into()));
    }
    if a.len() != b.len() || (a.dt() - b.dt()).abs() > 1e-14 * a.dt() {
        return Err(Error::ShapeMismatch(format!(
            "time axes differ: {} samples at dt {} vs {} at dt {}",
            a.len(),
            a.dt(),
            b.len(),
            b.dt()
        )));
    }
    Ok(())
}

/// Lattice and time maxima of the a-priori quantities over both trajectories.
pub fn measure_apriori(a: &Trajectory, b: &Trajectory) -> Result<AprioriBounds> {
    check_axes(a, b)?;
    let first = apriori_single(a)?;
    if std::ptr::eq(a, b) {
        return Ok(first);
    }
    Ok(first.max(apriori_single(b)?))
}

/// `Σ_K α_K ∫ C_K(x, J u)` by the midpoint rule on the cell lattice.
pub fn stored_energy_integral(material: &ConicMaterial, u: &Field) -> Result<f64> {
    let grid = *u.grid();
    let d = grid.dim();
    let jac = cell_jacobian(u)?;
    let m = jac.ncomp();
    let sum: f64 = (0..grid.num_cells())
        .into_par_iter()
        .with_min_len(256)
        .map(|c| {
            let mut y = vec![0.0; m];
            jac.gather(c, &mut y);
            material.energy(&grid.cell_center(c)[..d], &y)
        })
        .sum();
    Ok(sum * grid.cell_volume())
}

/// Energy and both sides of the energy inequality at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// `‖u̇‖²_ρ + 2 Σ α_K ∫ C_K(x, J u)`.
    pub energy: f64,
    /// `‖u̇‖²_ρ + 2 Σ α_K κ_K^{[0]} ‖J u‖²`.
    pub lemma41_lhs: f64,
    /// `[(‖u₁‖²_ρ + 2 Σ α_K μ_K^{[0]} ‖J u₀‖²)^{1/2} + (∫₀^τ ‖f‖)^{1/2}]²`.
    pub lemma41_rhs: f64,
    /// `(rhs - lhs) / (rhs + 1e-12)`.
    pub margin: f64,
    /// Right side with `√ρ_max ∫₀^τ ‖f‖` in place of its square root.
    pub gronwall_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma41Report {
    pub steps: usize,
    pub slack: f64,
    pub min_margin: f64,
    pub worst_time: f64,
    /// Smallest margin against the Gronwall form of the right side.
    pub min_gronwall_margin: f64,
    /// `max_t |E(t) - E(0)| / E(0)` (0 when `E(0) = 0`).
    pub max_energy_drift: f64,
    /// Times at which the margin fell below `-slack`.
    pub violations: Vec<f64>,
    pub pass: bool,
}

fn margin(lhs: f64, rhs: f64) -> f64 {
    (rhs - lhs) / (rhs + 1e-12)
}

/// Energy series of a trajectory and the energy inequality per step.
pub fn energy_balance(tr: &Trajectory) -> Result<(Vec<EnergySample>, Lemma41Report)> {
    let problem = tr.problem();
    let material = problem.material();
    let rho = problem.density();
    let rho_max = material.rho_max();
    let kappa0 = material.weighted_bound(|b| b.kappa0);
    let mu0 = material.weighted_bound(|b| b.mu0);
    let ju0 = cell_jacobian(problem.u0())?.l2();
    let initial = problem.u1().l2_rho(&rho)?.powi(2) + 2.0 * mu0 * ju0 * ju0;

    let f_norms: Vec<f64> = tr.forcing_samples()?.iter().map(Field::l2).collect();
    let dt = tr.dt();
    let mut cumulative = vec![0.0; f_norms.len()];
    for m in 1..f_norms.len() {
        cumulative[m] = cumulative[m - 1] + trapezoid(&f_norms[m - 1..=m], dt);
    }

    let samples: Vec<EnergySample> = (0..tr.len())
        .into_par_iter()
        .map(|m| {
            let u = tr.snapshot(m);
            let kinetic = tr.velocity(m)?.l2_rho(&rho)?.powi(2);
            let stored = stored_energy_integral(material, u)?;
            let ju = cell_jacobian(u)?.l2();
            let lhs = kinetic + 2.0 * kappa0 * ju * ju;
            let rhs = (initial.sqrt() + cumulative[m].sqrt()).powi(2);
            let gronwall_rhs = (initial.sqrt() + rho_max.sqrt() * cumulative[m]).powi(2);
            Ok(EnergySample {
                t: tr.time(m),
                energy: kinetic + 2.0 * stored,
                lemma41_lhs: lhs,
                lemma41_rhs: rhs,
                margin: margin(lhs, rhs),
                gronwall_rhs,
            })
        })
        .collect::<Result<_>>()?;

    let e0 = samples[0].energy;
    let max_energy_drift = if e0 > 0.0 {
        samples.iter().map(|s| (s.energy - e0).abs() / e0).fold(0.0, f64::max)
    } else {
        0.0
    };
    let (worst_time, min_margin) = samples
        .iter()
        .map(|s| (s.t, s.margin))
        .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let min_gronwall_margin = samples
        .iter()
        .map(|s| margin(s.lemma41_lhs, s.gronwall_rhs))
        .fold(f64::INFINITY, f64::min);
    let violations: Vec<f64> = samples
        .iter()
        .filter(|s| s.margin < -ENERGY_SLACK)
        .map(|s| s.t)
        .collect();
    let report = Lemma41Report {
        steps: samples.len() - 1,
        slack: ENERGY_SLACK,
        min_margin,
        worst_time,
        min_gronwall_margin,
        max_energy_drift,
        pass: violations.is_empty(),
        violations,
    };
    Ok((samples, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, Forcing, Harmonic, ProblemInstance, ProfileTerm, VectorProfile};
    use crate::energy::{conic_combine, quadratic_model, SpatialCoefficient, StoredEnergy};
    use crate::grid::{make_grid, FieldShape};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn quadratic(c: f64, d: usize) -> ConicMaterial {
        let q: Arc<dyn StoredEnergy> = Arc::new(quadratic_model(c, d).unwrap());
        conic_combine(vec![q], vec![1.0], SpatialCoefficient::constant(1.0), d).unwrap()
    }

    fn wave(res: usize) -> Trajectory {
        let g = make_grid(1, 2, res).unwrap();
        let u0 = VectorProfile::new(vec![ProfileTerm::sine(0, 1.0, vec![1])]).sample(&g).unwrap();
        let p = ProblemInstance::new(quadratic(0.5, 1), u0, Field::zeros(&g, FieldShape::Vector), Forcing::Zero, 1.0)
            .unwrap();
        simulate(&p).unwrap()
    }

    #[test]
    fn zero_trajectory_has_zero_bounds() {
        let g = make_grid(1, 2, 15).unwrap();
        let z = Field::zeros(&g, FieldShape::Vector);
        let p = ProblemInstance::new(quadratic(0.5, 1), z.clone(), z, Forcing::Zero, 0.2).unwrap();
        let tr = simulate(&p).unwrap();
        assert_eq!(measure_apriori(&tr, &tr).unwrap(), AprioriBounds::default());
        let (series, report) = energy_balance(&tr).unwrap();
        assert!(series.iter().all(|s| s.lemma41_lhs == 0.0 && s.lemma41_rhs == 0.0));
        assert!(report.pass);
    }

    #[test]
    fn standing_wave_m0_matches_closed_form() {
        let tr = wave(63);
        let h = tr.grid().spacing();
        let lam = (4.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        let expected = lam * 0.5f64.sqrt();
        let b = measure_apriori(&tr, &tr).unwrap();
        assert!((b.m0 - expected).abs() < 0.02 * expected, "{} vs {expected}", b.m0);
        assert!((b.m3 - lam).abs() < 0.02 * lam);
        assert!(b.m1 > 0.0 && b.m2 > 0.0);
        let other = wave(63);
        assert_eq!(measure_apriori(&tr, &other).unwrap(), b);
    }

    #[test]
    fn mismatched_axes_are_rejected() {
        assert!(measure_apriori(&wave(15), &wave(31)).is_err());
    }

    #[test]
    fn energy_inequality_holds_with_forcing() {
        let g = make_grid(1, 2, 63).unwrap();
        let u0 = VectorProfile::new(vec![ProfileTerm::sine(0, 0.2, vec![1])]).sample(&g).unwrap();
        let u1 = VectorProfile::new(vec![ProfileTerm::sine(1, 0.3, vec![2])]).sample(&g).unwrap();
        let f = Forcing::separable(VectorProfile::new(vec![ProfileTerm::sine(0, 1.0, vec![1])]), Harmonic::new(2.0, 0.0));
        let p = ProblemInstance::new(quadratic(0.5, 1), u0, u1, f, 2.0).unwrap();
        let tr = simulate(&p).unwrap();
        assert!(tr.len() > 200);
        let (series, report) = energy_balance(&tr).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(series.len(), tr.len());
    }
}
