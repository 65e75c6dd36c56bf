//! Explicit time integration of `ρ ü = Σ_K α_K div ∇_Y C_K(x, J u) + ρ f`
//! with homogeneous Dirichlet data.
//!
//! The flux `∇_Y C` is evaluated on the staggered cell lattice from the cell
//! Jacobian and mapped back to the nodes with its adjoint divergence, so the
//! semi-discrete system conserves `‖u̇‖²_ρ + 2 Σ α_K ∫ C_K` exactly.

pub(crate) mod diagnostics;
mod forcing;
mod profile;

use rayon::prelude::*;

pub use diagnostics::{
    energy_balance, measure_apriori, stored_energy_integral, AprioriBounds, EnergySample,
    Lemma41Report,
};
pub use forcing::{manufactured_forcing, ExactSolution, Forcing, MmsMode, SeparableSolution};
pub use profile::{Harmonic, ProfileTerm, VectorProfile, PROFILE_NAMES};

use crate::energy::ConicMaterial;
use crate::error::{Error, Result};
use crate::grid::{cell_divergence, cell_jacobian, CellField, Field, FieldShape, Grid};
use forcing::inverse_density;

pub const DEFAULT_CFL: f64 = 0.5;
/// Fewest steps taken, so one-sided time differences are defined.
pub const MIN_STEPS: usize = 4;
/// Abort once `‖u‖_∞` exceeds this multiple of the initial scale.
pub const BLOWUP_FACTOR: f64 = 1e6;

/// Initial-boundary value problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    material: ConicMaterial,
    u0: Field,
    u1: Field,
    forcing: Forcing,
    t_final: f64,
    steps: usize,
}

impl ProblemInstance {
    /// Builds the problem with the default CFL number.
    pub fn new(material: ConicMaterial, u0: Field, u1: Field, forcing: Forcing, t_final: f64) -> Result<Self> {
        let mut p = Self {
            material,
            u0,
            u1,
            forcing,
            t_final,
            steps: MIN_STEPS,
        };
        p.validate()?;
        p.steps = p.steps_for(p.max_stable_dt(DEFAULT_CFL));
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let g = self.u0.grid();
        if self.u0.shape() != FieldShape::Vector || self.u1.shape() != FieldShape::Vector {
            return Err(Error::ShapeMismatch("initial data must be vector fields".into()));
        }
        if self.u1.grid() != g {
            return Err(Error::ShapeMismatch("u0 and u1 live on different grids".into()));
        }
        if self.material.dim() != g.dim() {
            return Err(Error::ShapeMismatch(format!(
                "material is {}-dimensional, grid is {}-dimensional",
                self.material.dim(),
                g.dim()
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        Ok(())
    }

    fn steps_for(&self, dt: f64) -> usize {
        ((self.t_final / dt).ceil() as usize).max(MIN_STEPS)
    }

    /// `cfl · h / √(μ / ρ_min)` with `μ = Σ α_K μ_K^{[1]}`.
    pub fn max_stable_dt(&self, cfl: f64) -> f64 {
        let speed = (self.material.mu() / self.material.rho_min()).sqrt();
        cfl * self.grid().spacing() / speed
    }

    /// Re-derives the step from a CFL number in `(0, 1]`.
    pub fn with_cfl(mut self, cfl: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("CFL number {cfl} not in (0, 1]")));
        }
        self.steps = self.steps_for(self.max_stable_dt(cfl));
        Ok(self)
    }

    /// Uses the largest step `≤ dt` that divides `T`; rejects steps above the
    /// stability limit at CFL 1.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        let limit = self.max_stable_dt(1.0);
        if !(dt > 0.0) || dt > limit {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} outside (0, {limit:.6e}]"
            )));
        }
        self.steps = self.steps_for(dt);
        Ok(self)
    }

    /// Same problem with other data.
    pub fn with_data(&self, material: ConicMaterial, u0: Field, u1: Field, forcing: Forcing) -> Result<Self> {
        let p = Self {
            material,
            u0,
            u1,
            forcing,
            t_final: self.t_final,
            steps: self.steps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn material(&self) -> &ConicMaterial {
        &self.material
    }

    pub fn grid(&self) -> &Grid {
        self.u0.grid()
    }

    pub fn u0(&self) -> &Field {
        &self.u0
    }

    pub fn u1(&self) -> &Field {
        &self.u1
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn final_time(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// ρ at the nodes.
    pub fn density(&self) -> Field {
        self.material.rho().sample(self.grid())
    }
}

/// `Σ_K α_K ∇_Y C_K(x_c, J_c u)` on every cell.
pub fn cell_flux(material: &ConicMaterial, u: &Field) -> Result<CellField> {
    let grid = *u.grid();
    let jac = cell_jacobian(u)?;
    let m = jac.ncomp();
    let nc = grid.num_cells();
    let d = grid.dim();
    let point_major: Vec<f64> = (0..nc)
        .into_par_iter()
        .with_min_len(256)
        .flat_map_iter(|c| {
            let mut y = vec![0.0; m];
            jac.gather(c, &mut y);
            let mut p = vec![0.0; m];
            material.grad_y(&grid.cell_center(c)[..d], &y, &mut p);
            p
        })
        .collect();
    let mut data = vec![0.0; m * nc];
    for c in 0..nc {
        for a in 0..m {
            data[a * nc + c] = point_major[c * m + a];
        }
    }
    CellField::from_values(&grid, m, data)
}

/// `ρ⁻¹ Σ_K α_K div ∇_Y C_K(x, J u)` at the nodes.
pub(crate) fn internal_acceleration(material: &ConicMaterial, rho_inv: &[f64], u: &Field) -> Result<Field> {
    let mut out = cell_divergence(&cell_flux(material, u)?)?;
    for c in 0..out.ncomp() {
        for (v, r) in out.component_mut(c).iter_mut().zip(rho_inv) {
            *v *= r;
        }
    }
    Ok(out)
}

/// `u₂ = ρ⁻¹ Σ_K α_K div ∇_Y C_K(x, J u₀) + f(0)`, the initial acceleration.
pub fn compute_u2(problem: &ProblemInstance) -> Result<Field> {
    let grid = problem.grid();
    let rho_inv = inverse_density(&problem.material, grid);
    let mut a = internal_acceleration(&problem.material, &rho_inv, &problem.u0)?;
    a.axpy(1.0, &problem.forcing.value(0.0, grid)?)?;
    Ok(a)
}

/// Sampled solution `u(t_m)`, `t_m = m dt`, `m = 0..=steps`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    problem: ProblemInstance,
    snapshots: Vec<Field>,
}

/// Leapfrog with a Taylor start step.
pub fn simulate(problem: &ProblemInstance) -> Result<Trajectory> {
    let grid = *problem.grid();
    let dt = problem.dt();
    let t_final = problem.t_final;
    let rho_inv = inverse_density(&problem.material, &grid);
    let accel = |u: &Field, t: f64| -> Result<Field> {
        let mut a = internal_acceleration(&problem.material, &rho_inv, u)?;
        if !problem.forcing.is_zero() {
            a.axpy(1.0, &problem.forcing.value(t, &grid)?)?;
        }
        Ok(a)
    };

    let a0 = accel(&problem.u0, 0.0)?;
    let scale = problem
        .u0
        .max_abs()
        .max(t_final * problem.u1.max_abs())
        .max(t_final * t_final * a0.max_abs());
    let limit = BLOWUP_FACTOR * if scale > 0.0 { scale } else { 1.0 };
    let guard = |step: usize, u: &Field| -> Result<()> {
        if !u.is_finite() {
            return Err(Error::BlowUp {
                step,
                reason: "non-finite displacement".into(),
            });
        }
        let sup = u.max_abs();
        if sup > limit {
            return Err(Error::BlowUp {
                step,
                reason: format!("sup norm {sup:.3e} exceeds {limit:.3e}"),
            });
        }
        Ok(())
    };

    let mut snapshots = Vec::with_capacity(problem.steps + 1);
    snapshots.push(problem.u0.clone());
    let mut next = problem.u0.clone();
    next.axpy(dt, &problem.u1)?;
    next.axpy(0.5 * dt * dt, &a0)?;
    guard(1, &next)?;
    snapshots.push(next);
    for step in 1..problem.steps {
        let t = step as f64 * dt;
        let a = accel(&snapshots[step], t)?;
        let mut next = snapshots[step].scaled(2.0);
        next.axpy(-1.0, &snapshots[step - 1])?;
        next.axpy(dt * dt, &a)?;
        guard(step + 1, &next)?;
        snapshots.push(next);
    }
    Ok(Trajectory {
        problem: problem.clone(),
        snapshots,
    })
}

impl Trajectory {
    pub fn problem(&self) -> &ProblemInstance {
        &self.problem
    }

    pub fn material(&self) -> &ConicMaterial {
        &self.problem.material
    }

    pub fn grid(&self) -> &Grid {
        self.problem.grid()
    }

    pub fn dt(&self) -> f64 {
        self.problem.dt()
    }

    /// Number of samples (steps + 1).
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn snapshot(&self, m: usize) -> &Field {
        &self.snapshots[m]
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectories are never empty")
    }

    /// `u̇(t_m)` by centred differences, second-order one-sided at the ends.
    pub fn velocity(&self, m: usize) -> Result<Field> {
        crate::grid::time_derivative(&self.snapshots, self.dt(), m)
    }

    pub fn velocities(&self) -> Result<Vec<Field>> {
        (0..self.len()).map(|m| self.velocity(m)).collect()
    }

    /// `ü(t_m)`: three-point centred, four-point one-sided at the ends.
    pub fn acceleration(&self, m: usize) -> Result<Field> {
        second_time_derivative(&self.snapshots, self.dt(), m)
    }

    pub fn accelerations(&self) -> Result<Vec<Field>> {
        (0..self.len()).map(|m| self.acceleration(m)).collect()
    }

    /// Forcing samples `f(t_m)`.
    pub fn forcing_samples(&self) -> Result<Vec<Field>> {
        (0..self.len())
            .map(|m| self.problem.forcing.value(self.time(m), self.grid()))
            .collect()
    }
}

/// Second time derivative of sample `m` of a uniform series.
pub fn second_time_derivative(samples: &[Field], dt: f64, m: usize) -> Result<Field> {
    let len = samples.len();
    if len < 4 {
        return Err(Error::InvalidParameter(
            "second time derivative needs at least four samples".into(),
        ));
    }
    let w = 1.0 / (dt * dt);
    let combo: Vec<(usize, f64)> = if m == 0 {
        vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if m == len - 1 {
        vec![(m, 2.0), (m - 1, -5.0), (m - 2, 4.0), (m - 3, -1.0)]
    } else {
        vec![(m - 1, 1.0), (m, -2.0), (m + 1, 1.0)]
    };
    let mut out = Field::zeros(samples[0].grid(), samples[0].shape());
    for (idx, c) in combo {
        out.axpy(c * w, &samples[idx])?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{conic_combine, quadratic_model, saturating_model, SpatialCoefficient, StoredEnergy};
    use crate::grid::make_grid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn quadratic(c: f64, d: usize) -> ConicMaterial {
        let q: Arc<dyn StoredEnergy> = Arc::new(quadratic_model(c, d).unwrap());
        conic_combine(vec![q], vec![1.0], SpatialCoefficient::constant(1.0), d).unwrap()
    }

    fn sine_e1(g: &Grid, amp: f64) -> Field {
        VectorProfile::new(vec![ProfileTerm::sine(0, amp, vec![1; g.dim()])])
            .sample(g)
            .unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(2, 2, 7).unwrap();
        let z = Field::zeros(&g, FieldShape::Vector);
        let p = ProblemInstance::new(quadratic(0.5, 2), z.clone(), z, Forcing::Zero, 0.3).unwrap();
        let tr = simulate(&p).unwrap();
        assert!(tr.snapshots().iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn standing_wave_has_discrete_frequency() {
        let g = make_grid(1, 2, 63).unwrap();
        let h = g.spacing();
        let u0 = sine_e1(&g, 1.0);
        let p = ProblemInstance::new(quadratic(0.5, 1), u0.clone(), Field::zeros(&g, FieldShape::Vector), Forcing::Zero, 1.0)
            .unwrap();
        let tr = simulate(&p).unwrap();
        let omega = (2.0 / h) * (PI * h / 2.0).sin();
        let dt = tr.dt();
        for m in [tr.len() / 2, tr.len() - 1] {
            let exact = u0.scaled((omega * tr.time(m)).cos());
            let err = tr.snapshot(m).sub(&exact).unwrap().max_abs();
            assert!(err < 0.5 * omega.powi(3) * dt * dt, "step {m}: {err}");
        }
    }

    #[test]
    fn quadratic_energy_is_conserved() {
        let g = make_grid(2, 2, 15).unwrap();
        let u0 = sine_e1(&g, 0.1);
        let u1 = VectorProfile::new(vec![ProfileTerm::sine(1, 0.2, vec![2, 1])]).sample(&g).unwrap();
        let mut drift = Vec::new();
        for cfl in [0.4, 0.2] {
            let p = ProblemInstance::new(quadratic(0.7, 2), u0.clone(), u1.clone(), Forcing::Zero, 0.5)
                .unwrap()
                .with_cfl(cfl)
                .unwrap();
            let (series, _) = energy_balance(&simulate(&p).unwrap()).unwrap();
            let e0 = series[0].energy;
            drift.push(series.iter().map(|s| (s.energy - e0).abs() / e0).fold(0.0, f64::max));
        }
        assert!(drift[0] < 1e-2, "{drift:?}");
        assert!(drift[1] < drift[0] / 3.0, "{drift:?}");
    }

    #[test]
    fn time_reversal_returns_to_start() {
        let g = make_grid(1, 2, 31).unwrap();
        let u0 = sine_e1(&g, 0.3);
        let u1 = VectorProfile::new(vec![ProfileTerm::sine(1, 0.5, vec![2])]).sample(&g).unwrap();
        let m = quadratic(0.5, 1);
        let p = ProblemInstance::new(m.clone(), u0.clone(), u1, Forcing::Zero, 0.4).unwrap();
        let fwd = simulate(&p).unwrap();
        let n = fwd.len() - 1;
        let back = p
            .with_data(m, fwd.last().clone(), fwd.velocity(n).unwrap().scaled(-1.0), Forcing::Zero)
            .unwrap();
        let rev = simulate(&back).unwrap();
        let err = rev.last().sub(&u0).unwrap().max_abs();
        assert!(err < 50.0 * fwd.dt().powi(2), "{err}");
    }

    #[test]
    fn u2_is_laplacian_for_unit_quadratic() {
        let g = make_grid(1, 2, 31).unwrap();
        let u0 = VectorProfile::new(vec![
            ProfileTerm::sine(0, 0.3, vec![2]),
            ProfileTerm::sine(1, -0.1, vec![3]),
        ])
        .sample(&g)
        .unwrap();
        let f = Forcing::separable(VectorProfile::new(vec![ProfileTerm::sine(1, 1.0, vec![1])]), Harmonic::new(3.0, 0.0));
        let p = ProblemInstance::new(quadratic(0.5, 1), u0.clone(), Field::zeros(&g, FieldShape::Vector), f.clone(), 1.0)
            .unwrap();
        let mut expected = crate::grid::laplacian(&u0);
        expected.axpy(1.0, &f.value(0.0, &g).unwrap()).unwrap();
        assert!(compute_u2(&p).unwrap().sub(&expected).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn u2_matches_simulated_acceleration() {
        let g = make_grid(1, 2, 31).unwrap();
        let sat: Arc<dyn StoredEnergy> = Arc::new(saturating_model(0.5, 0.2, 1.0, 1).unwrap());
        let m = conic_combine(vec![sat], vec![1.0], SpatialCoefficient::constant(1.0), 1).unwrap();
        let u0 = VectorProfile::new(vec![ProfileTerm::sine(0, 0.4, vec![1]), ProfileTerm::sine(1, 0.3, vec![2])])
            .sample(&g)
            .unwrap();
        let u1 = Field::zeros(&g, FieldShape::Vector);
        let u2 = {
            let p = ProblemInstance::new(m.clone(), u0.clone(), u1.clone(), Forcing::Zero, 0.2).unwrap();
            compute_u2(&p).unwrap()
        };
        let mut errs = Vec::new();
        for cfl in [0.2, 0.1] {
            let p = ProblemInstance::new(m.clone(), u0.clone(), u1.clone(), Forcing::Zero, 0.2)
                .unwrap()
                .with_cfl(cfl)
                .unwrap();
            let tr = simulate(&p).unwrap();
            errs.push(tr.acceleration(0).unwrap().sub(&u2).unwrap().max_abs() / u2.max_abs());
        }
        assert!(errs[1] < errs[0] / 3.0 && errs[0] < 1e-2, "{errs:?}");
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let g = make_grid(1, 2, 15).unwrap();
        let u0 = VectorProfile::new(vec![ProfileTerm::Bump {
            component: 0,
            amplitude: 1.0,
            center: vec![0.4],
            width: 0.05,
        }])
        .sample(&g)
        .unwrap();
        let p = ProblemInstance::new(quadratic(0.5, 1), u0, Field::zeros(&g, FieldShape::Vector), Forcing::Zero, 4.0)
            .unwrap();
        // Bypass the CFL check to force an unstable step.
        let unstable = ProblemInstance { steps: 20, ..p };
        match simulate(&unstable) {
            Err(Error::BlowUp { step, .. }) => assert!(step > 1 && step <= 20),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn dt_above_limit_is_rejected() {
        let g = make_grid(1, 2, 15).unwrap();
        let z = Field::zeros(&g, FieldShape::Vector);
        let p = ProblemInstance::new(quadratic(0.5, 1), z.clone(), z, Forcing::Zero, 1.0).unwrap();
        let limit = p.max_stable_dt(1.0);
        assert!(p.clone().with_dt(1.1 * limit).is_err());
        let q = p.with_dt(0.3 * limit).unwrap();
        assert!(q.dt() <= 0.3 * limit && q.steps() as f64 * q.dt() - 1.0 < 1e-12);
    }
}
