//! Discrete norms (rectangle rule, weight `h^d` per node).

use super::ops::{d2_axis, jacobian};
use super::{Field, FieldShape, Grid};
use crate::error::{Error, Result};

/// Which norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    /// `(∫ rho |f|^2)^{1/2}`.
    L2Rho,
    H1,
    H2,
    /// Pure second-derivative norm on zero-trace fields.
    W22Gamma0,
    /// Largest pointwise Frobenius norm over the lattice.
    FrobeniusMax,
    /// `∫_0^T ‖f(t)‖ + ‖ḟ(t)‖ dt` for a sampled time series.
    W11Time,
}

/// A spatial field or a uniformly sampled time series of fields.
#[derive(Debug, Clone, Copy)]
pub enum NormInput<'a> {
    Field(&'a Field),
    Series { samples: &'a [Field], dt: f64 },
}

pub fn norm(input: NormInput<'_>, kind: NormKind, rho: Option<&Field>) -> Result<f64> {
    match (input, kind) {
        (NormInput::Series { samples, dt }, NormKind::W11Time) => w11_time(samples, dt),
        (NormInput::Series { .. }, other) => Err(Error::InvalidParameter(format!(
            "{other:?} takes a single field, not a time series"
        ))),
        (NormInput::Field(_), NormKind::W11Time) => Err(Error::InvalidParameter(
            "W11Time needs a time series".into(),
        )),
        (NormInput::Field(f), NormKind::L2Rho) => {
            let rho = rho.ok_or_else(|| {
                Error::InvalidParameter("weighted L2 norm requires a density field".into())
            })?;
            weighted_l2(f, rho)
        }
        (NormInput::Field(f), kind) => Ok(match kind {
            NormKind::L2 => f.l2(),
            NormKind::H1 => h1(f),
            NormKind::H2 => h2(f),
            NormKind::W22Gamma0 => w22(f),
            NormKind::FrobeniusMax => frobenius_max(f),
            NormKind::L2Rho | NormKind::W11Time => unreachable!(),
        }),
    }
}

fn weighted_l2(f: &Field, rho: &Field) -> Result<f64> {
    if rho.shape() != FieldShape::Scalar || rho.grid().num_points() != f.grid().num_points() {
        return Err(Error::ShapeMismatch("density must be a scalar field on the same grid".into()));
    }
    let w = rho.values();
    let mut s = 0.0;
    for c in 0..f.ncomp() {
        s += f
            .component(c)
            .iter()
            .zip(w)
            .map(|(v, r)| r * v * v)
            .sum::<f64>();
    }
    Ok((s * f.grid().cell_volume()).sqrt())
}

fn jacobian_sq(f: &Field) -> f64 {
    match f.shape() {
        FieldShape::Vector => jacobian(f).map(|j| j.l2().powi(2)).unwrap_or(0.0),
        _ => {
            // component-wise gradient for scalar or matrix-valued data
            let grid = *f.grid();
            let mut buf = vec![0.0; grid.num_points()];
            let mut s = 0.0;
            for c in 0..f.ncomp() {
                for axis in 0..grid.dim() {
                    super::ops::d1_axis(&grid, f.component(c), axis, &mut buf);
                    s += buf.iter().map(|v| v * v).sum::<f64>();
                }
            }
            s * grid.cell_volume()
        }
    }
}

pub(crate) fn h1(f: &Field) -> f64 {
    (f.l2().powi(2) + jacobian_sq(f)).sqrt()
}

pub(crate) fn h2(f: &Field) -> f64 {
    (f.l2().powi(2) + jacobian_sq(f) + w22_sq(f)).sqrt()
}

pub(crate) fn w22(f: &Field) -> f64 {
    w22_sq(f).sqrt()
}

/// Sum of squared second differences of one scalar component.
///
/// Pure derivatives use the three-point stencil at the nodes; the mixed
/// derivative lives on the cell lattice, `(D+_x D+_y v)` at every cell
/// including those touching the ghost layer, and counts twice (`xy`, `yx`).
/// With this pairing `Σ_{lj} ‖∂_{lj} v‖² = ‖Δ_h v‖²` holds exactly for every
/// zero-boundary lattice function.
pub(crate) fn w22_component_sq(grid: &Grid, v: &[f64]) -> f64 {
    let mut buf = vec![0.0; grid.num_points()];
    let mut s = 0.0;
    for axis in 0..grid.dim() {
        d2_axis(grid, v, axis, &mut buf);
        s += buf.iter().map(|x| x * x).sum::<f64>();
    }
    if grid.dim() == 2 {
        s += 2.0 * mixed_cell_sq(grid, v);
    }
    s * grid.cell_volume()
}

/// `Σ_cells (D+_x D+_y v)^2` (unweighted).
fn mixed_cell_sq(grid: &Grid, v: &[f64]) -> f64 {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let m = grid.resolution() + 1;
    let at = |i: usize, j: usize| grid.extended_node([i, j]).map_or(0.0, |p| v[p]);
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            let dxy = (at(i + 1, j + 1) - at(i + 1, j) - at(i, j + 1) + at(i, j)) * inv_h2;
            s += dxy * dxy;
        }
    }
    s
}

fn w22_sq(f: &Field) -> f64 {
    (0..f.ncomp())
        .map(|c| w22_component_sq(f.grid(), f.component(c)))
        .sum()
}

fn frobenius_max(f: &Field) -> f64 {
    let np = f.grid().num_points();
    (0..np)
        .map(|p| {
            (0..f.ncomp())
                .map(|c| f.at(p, c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Time derivative of sample `m` of a uniformly spaced series: centred in the
/// interior, second-order one-sided at the ends (first order for two samples).
pub fn time_derivative(samples: &[Field], dt: f64, m: usize) -> Result<Field> {
    let len = samples.len();
    if len < 2 {
        return Err(Error::InvalidParameter(
            "time derivative needs at least two samples".into(),
        ));
    }
    let mut out = Field::zeros(samples[0].grid(), samples[0].shape());
    let combo: Vec<(usize, f64)> = if len == 2 {
        vec![(0, -1.0 / dt), (1, 1.0 / dt)]
    } else if m == 0 {
        vec![(0, -1.5 / dt), (1, 2.0 / dt), (2, -0.5 / dt)]
    } else if m == len - 1 {
        vec![(m, 1.5 / dt), (m - 1, -2.0 / dt), (m - 2, 0.5 / dt)]
    } else {
        vec![(m + 1, 0.5 / dt), (m - 1, -0.5 / dt)]
    };
    for (idx, w) in combo {
        out.axpy(w, &samples[idx])?;
    }
    Ok(out)
}

fn w11_time(samples: &[Field], dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(
            "W11 norm needs at least two time samples".into(),
        ));
    }
    let vals: Vec<f64> = (0..samples.len())
        .map(|m| Ok(samples[m].l2() + time_derivative(samples, dt, m)?.l2()))
        .collect::<Result<_>>()?;
    Ok(trapezoid(&vals, dt))
}

/// Composite trapezoidal rule on a uniform grid.
pub(crate) fn trapezoid(vals: &[f64], dt: f64) -> f64 {
    match vals.len() {
        0 | 1 => 0.0,
        len => {
            let inner: f64 = vals[1..len - 1].iter().sum();
            dt * (inner + 0.5 * (vals[0] + vals[len - 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian, make_grid};
    use std::f64::consts::PI;

    #[test]
    fn constant_field_l2_is_quadrature_weight() {
        let g = make_grid(2, 1, 9).unwrap();
        let f = Field::from_values(&g, FieldShape::Scalar, vec![1.0; 81]).unwrap();
        let expect = (g.cell_volume() * 81.0).sqrt();
        assert!((norm(NormInput::Field(&f), NormKind::L2, None).unwrap() - expect).abs() < 1e-14);
        let rho = Field::from_values(&g, FieldShape::Scalar, vec![4.0; 81]).unwrap();
        let weighted = norm(NormInput::Field(&f), NormKind::L2Rho, Some(&rho)).unwrap();
        assert!((weighted - 2.0 * expect).abs() < 1e-14);
    }

    #[test]
    fn weighted_norm_needs_density() {
        let g = make_grid(1, 2, 5).unwrap();
        let f = Field::zeros(&g, FieldShape::Vector);
        assert!(norm(NormInput::Field(&f), NormKind::L2Rho, None).is_err());
        assert!(norm(NormInput::Field(&f), NormKind::W11Time, None).is_err());
    }

    #[test]
    fn w22_of_eigenfunction() {
        let g = make_grid(1, 2, 15).unwrap();
        let h = g.spacing();
        let f = Field::from_fn(&g, FieldShape::Vector, |x, o| {
            o[0] = (PI * x[0]).sin();
            o[1] = 0.0;
        })
        .unwrap();
        let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((f.w22() - lam * f.l2()).abs() < 1e-10 * lam);
    }

    #[test]
    fn h2_decomposes_into_parts() {
        let g = make_grid(2, 1, 8).unwrap();
        let f = Field::from_fn(&g, FieldShape::Vector, |x, o| {
            o[0] = (PI * x[0]).sin() * (2.0 * PI * x[1]).sin() * (1.0 + x[0]);
        })
        .unwrap();
        let j = jacobian(&f).unwrap().l2();
        let lhs = f.h2().powi(2);
        let rhs = f.l2().powi(2) + j * j + f.w22().powi(2);
        assert!((lhs - rhs).abs() < 1e-12 * lhs);
    }

    #[test]
    fn w22_equals_laplacian_norm() {
        let g = make_grid(2, 1, 9).unwrap();
        let f = Field::from_fn(&g, FieldShape::Vector, |x, o| {
            o[0] = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (3.0 * x[0] + x[1]).exp();
        })
        .unwrap();
        let lap = laplacian(&f).l2();
        assert!((f.w22() - lap).abs() < 1e-10 * lap);
    }

    #[test]
    fn w11_of_constant_in_time_series() {
        let g = make_grid(1, 2, 5).unwrap();
        let f = Field::from_values(&g, FieldShape::Vector, vec![1.0; 10]).unwrap();
        let series = vec![f.clone(); 11];
        let v = norm(
            NormInput::Series {
                samples: &series,
                dt: 0.1,
            },
            NormKind::W11Time,
            None,
        )
        .unwrap();
        assert!((v - f.l2()).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let vals: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        assert!((trapezoid(&vals, 0.1) - 0.5).abs() < 1e-14);
    }
}
