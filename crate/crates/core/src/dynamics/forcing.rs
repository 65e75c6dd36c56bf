//! Body forces `f(t, x)` and manufactured solutions.

use std::sync::Arc;

use super::profile::{Harmonic, VectorProfile};
use super::internal_acceleration;
use crate::energy::ConicMaterial;
use crate::error::{Error, Result};
use crate::grid::{Field, FieldShape, Grid};

/// Step of the centred difference used for `ḟ` of manufactured forces.
const RATE_STEP: f64 = 1e-4;

/// A smooth, boundary-compatible reference solution `u(t, x)`.
pub trait ExactSolution: Send + Sync + std::fmt::Debug {
    fn components(&self) -> usize;
    fn value(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// `∂_t^order u`.
    fn time_derivative(&self, t: f64, x: &[f64], order: u32, out: &mut [f64]);
    /// `∂_l u_k` at `k d + l`.
    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// `∂_l ∂_j u_k` at `(k d + l) d + j`.
    fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]);
}

/// `u(t, x) = g(t) φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSolution {
    pub profile: VectorProfile,
    pub temporal: Harmonic,
    pub components: usize,
}

impl ExactSolution for SeparableSolution {
    fn components(&self) -> usize {
        self.components
    }

    fn value(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.time_derivative(t, x, 0, out);
    }

    fn time_derivative(&self, t: f64, x: &[f64], order: u32, out: &mut [f64]) {
        self.profile.value(x, out);
        let g = self.temporal.derivative(t, order);
        out.iter_mut().for_each(|o| *o *= g);
    }

    fn jacobian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.profile.jacobian(x, out);
        let g = self.temporal.value(t);
        out.iter_mut().for_each(|o| *o *= g);
    }

    fn hessian(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.profile.hessian(x, out);
        let g = self.temporal.value(t);
        out.iter_mut().for_each(|o| *o *= g);
    }
}

/// How the spatial part of a manufactured force is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsMode {
    /// With the simulator's own stencils: the discrete solution then carries
    /// only the time-stepping error.
    Discrete,
    /// From analytic derivatives of the exact solution.
    Analytic,
}

#[derive(Debug)]
pub struct Manufactured {
    material: ConicMaterial,
    exact: Arc<dyn ExactSolution>,
    mode: MmsMode,
}

/// Right-hand side `f(t, ·)` of the equation of motion, with `ḟ(t, ·)`.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    Separable {
        profile: VectorProfile,
        temporal: Harmonic,
    },
    Manufactured(Arc<Manufactured>),
    Sum(Vec<Forcing>),
}

impl Forcing {
    pub fn separable(profile: VectorProfile, temporal: Harmonic) -> Self {
        Forcing::Separable { profile, temporal }
    }

    /// `self + other`, flattening nested sums.
    pub fn plus(self, other: Forcing) -> Forcing {
        let mut parts = Vec::new();
        for f in [self, other] {
            match f {
                Forcing::Zero => {}
                Forcing::Sum(v) => parts.extend(v),
                f => parts.push(f),
            }
        }
        match parts.len() {
            0 => Forcing::Zero,
            1 => parts.pop().expect("one part"),
            _ => Forcing::Sum(parts),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Separable { profile, .. } => profile.is_zero(),
            Forcing::Manufactured(_) => false,
            Forcing::Sum(v) => v.iter().all(Forcing::is_zero),
        }
    }

    /// `f(t, ·)` at the interior nodes.
    pub fn value(&self, t: f64, grid: &Grid) -> Result<Field> {
        match self {
            Forcing::Zero => Ok(Field::zeros(grid, FieldShape::Vector)),
            Forcing::Separable { profile, temporal } => {
                Ok(profile.sample(grid)?.scaled(temporal.value(t)))
            }
            Forcing::Manufactured(m) => m.value(t, grid),
            Forcing::Sum(parts) => sum_parts(parts, grid, |f| f.value(t, grid)),
        }
    }

    /// `ḟ(t, ·)` at the interior nodes.
    pub fn rate(&self, t: f64, grid: &Grid) -> Result<Field> {
        match self {
            Forcing::Zero => Ok(Field::zeros(grid, FieldShape::Vector)),
            Forcing::Separable { profile, temporal } => {
                Ok(profile.sample(grid)?.scaled(temporal.derivative(t, 1)))
            }
            Forcing::Manufactured(m) => {
                let mut out = m.value(t + RATE_STEP, grid)?;
                out.axpy(-1.0, &m.value(t - RATE_STEP, grid)?)?;
                Ok(out.scaled(0.5 / RATE_STEP))
            }
            Forcing::Sum(parts) => sum_parts(parts, grid, |f| f.rate(t, grid)),
        }
    }
}

fn sum_parts(parts: &[Forcing], grid: &Grid, eval: impl Fn(&Forcing) -> Result<Field>) -> Result<Field> {
    let mut out = Field::zeros(grid, FieldShape::Vector);
    for p in parts {
        out.axpy(1.0, &eval(p)?)?;
    }
    Ok(out)
}

/// Force that makes `exact` solve the equation of motion for `material`.
///
/// Errors when `exact` does not vanish on the boundary of the unit box.
pub fn manufactured_forcing(
    material: &ConicMaterial,
    exact: Arc<dyn ExactSolution>,
    mode: MmsMode,
) -> Result<Forcing> {
    let d = material.dim();
    let probe = Grid::new(d, exact.components(), 31)?;
    for t in [0.0, 0.3, 0.71, 1.0] {
        Field::from_fn(&probe, FieldShape::Vector, |x, out| exact.value(t, x, out))?;
    }
    Ok(Forcing::Manufactured(Arc::new(Manufactured {
        material: material.clone(),
        exact,
        mode,
    })))
}

impl Manufactured {
    fn sample(&self, grid: &Grid, mut eval: impl FnMut(&[f64], &mut [f64])) -> Result<Field> {
        let d = grid.dim();
        let n = grid.components();
        let np = grid.num_points();
        let mut data = vec![0.0; n * np];
        let mut buf = vec![0.0; n];
        for p in 0..np {
            eval(&grid.position(p)[..d], &mut buf);
            for k in 0..n {
                data[k * np + p] = buf[k];
            }
        }
        Field::from_values(grid, FieldShape::Vector, data)
    }

    fn value(&self, t: f64, grid: &Grid) -> Result<Field> {
        if grid.components() != self.exact.components() || grid.dim() != self.material.dim() {
            return Err(Error::ShapeMismatch(
                "manufactured solution and grid disagree on n or d".into(),
            ));
        }
        let accel = self.sample(grid, |x, o| self.exact.time_derivative(t, x, 2, o))?;
        let spatial = match self.mode {
            MmsMode::Discrete => {
                let u = self.sample(grid, |x, o| self.exact.value(t, x, o))?;
                let rho_inv = inverse_density(&self.material, grid);
                internal_acceleration(&self.material, &rho_inv, &u)?
            }
            MmsMode::Analytic => self.analytic_acceleration(t, grid)?,
        };
        accel.sub(&spatial)
    }

    /// `ρ⁻¹ Σ_l ∂_l [∂_{Y_kl} C(x, J u)]` by the chain rule.
    fn analytic_acceleration(&self, t: f64, grid: &Grid) -> Result<Field> {
        let d = grid.dim();
        let n = grid.components();
        let m = n * d;
        let mut y = vec![0.0; m];
        let mut hu = vec![0.0; m * d];
        let mut gxgy = vec![0.0; d * m];
        let mut hyy = vec![0.0; m * m];
        self.sample(grid, |x, out| {
            self.exact.jacobian(t, x, &mut y);
            self.exact.hessian(t, x, &mut hu);
            self.material.grad_x_grad_y(x, &y, &mut gxgy);
            self.material.hess_yy(x, &y, &mut hyy);
            let rho = self.material.rho().value(x);
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..d {
                    let a = k * d + l;
                    acc += gxgy[l * m + a];
                    for i in 0..n {
                        for j in 0..d {
                            acc += hyy[(i * d + j) * m + a] * hu[(i * d + l) * d + j];
                        }
                    }
                }
                out[k] = acc / rho;
            }
        })
    }
}

/// `1 / ρ` at the interior nodes.
pub(crate) fn inverse_density(material: &ConicMaterial, grid: &Grid) -> Vec<f64> {
    let d = grid.dim();
    (0..grid.num_points())
        .map(|p| 1.0 / material.rho().value(&grid.position(p)[..d]))
        .collect()
}
