//! Finite-difference operators with zero ghost values.

use super::{CellField, Field, FieldShape, Grid, MAX_DIM};
use crate::error::{Error, Result};

#[inline]
fn ghost(src: &[f64], q: Option<usize>) -> f64 {
    q.map_or(0.0, |q| src[q])
}

/// Three-point second difference along `axis`.
pub(crate) fn d2_axis(grid: &Grid, src: &[f64], axis: usize, out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    for (p, o) in out.iter_mut().enumerate() {
        let fwd = ghost(src, grid.neighbor(p, axis, 1));
        let bwd = ghost(src, grid.neighbor(p, axis, -1));
        *o = (fwd - 2.0 * src[p] + bwd) * inv_h2;
    }
}

/// Centred first difference along `axis`.
pub(crate) fn d1_axis(grid: &Grid, src: &[f64], axis: usize, out: &mut [f64]) {
    let inv_2h = 0.5 / grid.spacing();
    for (p, o) in out.iter_mut().enumerate() {
        let fwd = ghost(src, grid.neighbor(p, axis, 1));
        let bwd = ghost(src, grid.neighbor(p, axis, -1));
        *o = (fwd - bwd) * inv_2h;
    }
}

/// Second difference `∂_{l j}` at the nodes: the three-point stencil for
/// `l == j`, composed centred first differences otherwise.
pub fn colocated_second_derivative(grid: &Grid, src: &[f64], l: usize, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    if l == j {
        d2_axis(grid, src, l, &mut out);
    } else {
        let mut tmp = vec![0.0; src.len()];
        d1_axis(grid, src, j, &mut tmp);
        d1_axis(grid, &tmp, l, &mut out);
    }
    out
}

/// Discrete Dirichlet Laplacian, applied component-wise.
pub fn laplacian(f: &Field) -> Field {
    let grid = *f.grid();
    let mut out = Field::zeros(&grid, f.shape());
    let mut tmp = vec![0.0; grid.num_points()];
    for c in 0..f.ncomp() {
        let src = f.component(c);
        let dst = out.component_mut(c);
        for axis in 0..grid.dim() {
            d2_axis(&grid, src, axis, &mut tmp);
            for (d, t) in dst.iter_mut().zip(&tmp) {
                *d += t;
            }
        }
    }
    out
}

/// Centred-difference Jacobian `(Ju)_{ij} = ∂_j u_i`.
pub fn jacobian(u: &Field) -> Result<Field> {
    if u.shape() != FieldShape::Vector {
        return Err(Error::ShapeMismatch("jacobian expects a vector field".into()));
    }
    let grid = *u.grid();
    let d = grid.dim();
    let mut out = Field::zeros(&grid, FieldShape::Matrix);
    for i in 0..grid.components() {
        for j in 0..d {
            let mut buf = vec![0.0; grid.num_points()];
            d1_axis(&grid, u.component(i), j, &mut buf);
            out.component_mut(i * d + j).copy_from_slice(&buf);
        }
    }
    Ok(out)
}

/// Row-wise centred divergence `(div P)_i = Σ_j ∂_j P_{ij}`.
pub fn divergence(p: &Field) -> Result<Field> {
    if p.shape() != FieldShape::Matrix {
        return Err(Error::ShapeMismatch("divergence expects a matrix field".into()));
    }
    let grid = *p.grid();
    let d = grid.dim();
    let mut out = Field::zeros(&grid, FieldShape::Vector);
    let mut buf = vec![0.0; grid.num_points()];
    for i in 0..grid.components() {
        for j in 0..d {
            d1_axis(&grid, p.component(i * d + j), j, &mut buf);
            for (o, b) in out.component_mut(i).iter_mut().zip(&buf) {
                *o += b;
            }
        }
    }
    Ok(out)
}

/// Offsets of the `2^d` nodes bounding a cell, and their count.
#[inline]
fn cell_corners(d: usize) -> usize {
    1 << d
}

#[inline]
fn corner_offset(e: usize, axis: usize) -> usize {
    (e >> axis) & 1
}

/// Cell-centred Jacobian on the staggered lattice.
///
/// In one dimension this is the forward difference between neighbouring
/// nodes; in two dimensions each derivative is the average of the two
/// parallel edge differences of the cell.
pub fn cell_jacobian(u: &Field) -> Result<CellField> {
    if u.shape() != FieldShape::Vector {
        return Err(Error::ShapeMismatch(
            "cell jacobian expects a vector field".into(),
        ));
    }
    let grid = *u.grid();
    let d = grid.dim();
    let n = grid.components();
    let weight = 1.0 / ((1 << (d - 1)) as f64 * grid.spacing());
    let mut out = CellField::zeros(&grid, n * d);
    for c in 0..grid.num_cells() {
        let base = grid.cell_multi_index(c);
        for e in 0..cell_corners(d) {
            let mut ext = [0usize; MAX_DIM];
            for a in 0..d {
                ext[a] = base[a] + corner_offset(e, a);
            }
            let Some(node) = grid.extended_node(ext) else {
                continue;
            };
            for k in 0..n {
                let val = u.at(node, k) * weight;
                for l in 0..d {
                    let sign = if corner_offset(e, l) == 1 { 1.0 } else { -1.0 };
                    let idx = k * d + l;
                    let cur = out.at(c, idx);
                    out.set(c, idx, cur + sign * val);
                }
            }
        }
    }
    Ok(out)
}

/// Negative adjoint of [`cell_jacobian`]: maps a cell flux back to the nodes
/// so that `⟨cell_divergence(P), u⟩ = -⟨P, cell_jacobian(u)⟩` exactly.
pub fn cell_divergence(flux: &CellField) -> Result<Field> {
    let grid = *flux.grid();
    let d = grid.dim();
    let n = grid.components();
    if flux.ncomp() != n * d {
        return Err(Error::ShapeMismatch(format!(
            "cell flux has {} components, expected {}",
            flux.ncomp(),
            n * d
        )));
    }
    let weight = 1.0 / ((1 << (d - 1)) as f64 * grid.spacing());
    let mut out = Field::zeros(&grid, FieldShape::Vector);
    for c in 0..grid.num_cells() {
        let base = grid.cell_multi_index(c);
        for e in 0..cell_corners(d) {
            let mut ext = [0usize; MAX_DIM];
            for a in 0..d {
                ext[a] = base[a] + corner_offset(e, a);
            }
            let Some(node) = grid.extended_node(ext) else {
                continue;
            };
            for k in 0..n {
                let mut acc = 0.0;
                for l in 0..d {
                    let sign = if corner_offset(e, l) == 1 { 1.0 } else { -1.0 };
                    acc += sign * flux.at(c, k * d + l);
                }
                let cur = out.at(node, k);
                out.set(node, k, cur - acc * weight);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    fn sine_mode(g: &Grid, shape: FieldShape) -> Field {
        Field::from_fn(g, shape, |x, out| {
            let v: f64 = x.iter().map(|xi| (PI * xi).sin()).product();
            out.iter_mut().for_each(|o| *o = v);
        })
        .unwrap()
    }

    #[test]
    fn laplacian_of_sine_is_discrete_eigenvalue() {
        for (d, n) in [(1, 2), (2, 1)] {
            let g = make_grid(d, n, 15).unwrap();
            let h = g.spacing();
            let f = sine_mode(&g, FieldShape::Vector);
            let lam = -(d as f64) * 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
            let lf = laplacian(&f);
            for (a, b) in lf.values().iter().zip(f.values()) {
                assert!((a - lam * b).abs() < 1e-10 * lam.abs());
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let g = make_grid(2, 1, 7).unwrap();
        let z = Field::zeros(&g, FieldShape::Vector);
        assert!(laplacian(&z).values().iter().all(|v| *v == 0.0));
        assert!(jacobian(&z).unwrap().values().iter().all(|v| *v == 0.0));
        let zm = Field::zeros(&g, FieldShape::Matrix);
        assert!(divergence(&zm).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn jacobian_matches_stencil_definition() {
        let g = make_grid(1, 2, 9).unwrap();
        let h = g.spacing();
        let u = Field::from_fn(&g, FieldShape::Vector, |x, out| {
            out[0] = (PI * x[0]).sin();
            out[1] = 0.0;
        })
        .unwrap();
        let ju = jacobian(&u).unwrap();
        for p in 0..g.num_points() {
            let x = g.position(p)[0];
            let expect = ((PI * (x + h)).sin() - (PI * (x - h)).sin()) / (2.0 * h);
            assert!((ju.at(p, 0) - expect).abs() < 1e-12);
            assert_eq!(ju.at(p, 1), 0.0);
        }
    }

    #[test]
    fn cell_operators_are_adjoint() {
        let g = make_grid(2, 2, 6).unwrap();
        let u = Field::from_fn(&g, FieldShape::Vector, |x, out| {
            out[0] = (PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            out[1] = (3.0 * PI * x[0]).sin() * (PI * x[1]).sin() * (x[0] + 0.3);
        })
        .unwrap();
        let mut flux = CellField::zeros(&g, 4);
        for c in 0..g.num_cells() {
            let x = g.cell_center(c);
            for k in 0..4 {
                flux.set(c, k, (x[0] * (k as f64 + 1.0)).cos() + x[1] * x[1]);
            }
        }
        let ju = cell_jacobian(&u).unwrap();
        let lhs: f64 = cell_divergence(&flux).unwrap().inner(&u).unwrap();
        let rhs: f64 = flux
            .values()
            .iter()
            .zip(ju.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * g.cell_volume();
        assert!((lhs + rhs).abs() < 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn cell_operators_reproduce_compact_laplacian_in_1d() {
        let g = make_grid(1, 2, 11).unwrap();
        let u = Field::from_fn(&g, FieldShape::Vector, |x, out| {
            out[0] = (PI * x[0]).sin() + 0.2 * (3.0 * PI * x[0]).sin();
            out[1] = x[0] * x[0] * (1.0 - x[0]);
        })
        .unwrap();
        let composed = cell_divergence(&cell_jacobian(&u).unwrap()).unwrap();
        let lap = laplacian(&u);
        for (a, b) in composed.values().iter().zip(lap.values()) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }
}
