//! Rectangular lattice over the unit box with homogeneous Dirichlet data.
//!
//! Interior nodes sit at `x_i = (i + 1) h`, `i = 0..resolution`, with
//! `h = 1 / (resolution + 1)`. Boundary values are never stored: every
//! stencil treats the ghost layer as zero. Besides the node lattice there is
//! a staggered lattice of `(resolution + 1)^d` cells whose centres sit at
//! `(c + 1/2) h`; it carries strains and fluxes for the variational
//! discretisation used by the time integrator.

mod io;
mod embedding;
mod norm;
mod ops;

pub use embedding::{
    check_miranda_talenti, estimate_khat, estimate_khat_with_seed, miranda_talenti_ratio,
    random_trig_field, MirandaTalentiReport,
};
pub use norm::{norm, time_derivative, NormInput, NormKind};
pub(crate) use norm::trapezoid;
pub use ops::{
    cell_divergence, cell_jacobian, colocated_second_derivative, divergence, jacobian, laplacian,
};

use crate::error::{Error, Result};

/// Largest spatial dimension supported by the lattice.
pub const MAX_DIM: usize = 2;

/// Uniform lattice over `(0,1)^d` carrying `n`-component displacements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    components: usize,
    resolution: usize,
    spacing: f64,
}

/// Builds a grid, rejecting configurations where `n * d < 2`.
pub fn make_grid(dim: usize, components: usize, resolution: usize) -> Result<Grid> {
    Grid::new(dim, components, resolution)
}

impl Grid {
    pub fn new(dim: usize, components: usize, resolution: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension d={dim} not in {{1,2}}")));
        }
        if !(1..=2).contains(&components) {
            return Err(Error::InvalidGrid(format!(
                "component count n={components} not in {{1,2}}"
            )));
        }
        if components * dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "n*d = {} < 2: the dimension condition is ill-formed",
                components * dim
            )));
        }
        if resolution < 3 {
            return Err(Error::InvalidGrid(format!(
                "resolution {resolution} < 3 interior points per axis"
            )));
        }
        Ok(Self {
            dim,
            components,
            resolution,
            spacing: 1.0 / (resolution as f64 + 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// `n * d`, the size of a deformation gradient.
    pub fn nd(&self) -> usize {
        self.components * self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Quadrature weight `h^d` of one lattice point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Volume of the domain (the unit box).
    pub fn volume(&self) -> f64 {
        1.0
    }

    pub fn num_points(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn num_cells(&self) -> usize {
        (self.resolution + 1).pow(self.dim as u32)
    }

    /// Same lattice with a different component count.
    pub fn with_components(&self, components: usize) -> Result<Self> {
        Self::new(self.dim, components, self.resolution)
    }

    pub fn multi_index(&self, p: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [p, 0],
            _ => [p / self.resolution, p % self.resolution],
        }
    }

    pub fn linear_index(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.resolution + idx[1],
        }
    }

    /// Coordinates of interior node `p`; unused axes are zero.
    pub fn position(&self, p: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(p);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = (idx[a] as f64 + 1.0) * self.spacing;
        }
        x
    }

    /// Neighbour of node `p` along `axis`, or `None` on the ghost layer.
    #[inline]
    pub fn neighbor(&self, p: usize, axis: usize, delta: isize) -> Option<usize> {
        let mut idx = self.multi_index(p);
        let moved = idx[axis] as isize + delta;
        if moved < 0 || moved >= self.resolution as isize {
            return None;
        }
        idx[axis] = moved as usize;
        Some(self.linear_index(idx))
    }

    /// Node at extended-lattice index (0 and `resolution + 1` are ghosts).
    #[inline]
    pub(crate) fn extended_node(&self, ext: [usize; MAX_DIM]) -> Option<usize> {
        let mut idx = [0; MAX_DIM];
        for a in 0..self.dim {
            if ext[a] == 0 || ext[a] > self.resolution {
                return None;
            }
            idx[a] = ext[a] - 1;
        }
        Some(self.linear_index(idx))
    }

    pub fn cell_multi_index(&self, c: usize) -> [usize; MAX_DIM] {
        let m = self.resolution + 1;
        match self.dim {
            1 => [c, 0],
            _ => [c / m, c % m],
        }
    }

    /// Centre of staggered cell `c`.
    pub fn cell_center(&self, c: usize) -> [f64; MAX_DIM] {
        let idx = self.cell_multi_index(c);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = (idx[a] as f64 + 0.5) * self.spacing;
        }
        x
    }

    /// Component count of a field of the given shape on this grid.
    pub fn ncomp(&self, shape: FieldShape) -> usize {
        match shape {
            FieldShape::Scalar => 1,
            FieldShape::Vector => self.components,
            FieldShape::Matrix => self.components * self.dim,
        }
    }
}

/// What a field's components represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldShape {
    Scalar,
    /// `n` components.
    Vector,
    /// `n x d` components, entry `(k, l)` at `k * d + l`.
    Matrix,
}

/// Values at the interior nodes, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    shape: FieldShape,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid, shape: FieldShape) -> Self {
        Self {
            grid: *grid,
            shape,
            data: vec![0.0; grid.ncomp(shape) * grid.num_points()],
        }
    }

    /// Wraps raw interior values; rejects wrong lengths and non-finite entries.
    pub fn from_values(grid: &Grid, shape: FieldShape, data: Vec<f64>) -> Result<Self> {
        let expected = grid.ncomp(shape) * grid.num_points();
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self {
            grid: *grid,
            shape,
            data,
        })
    }

    /// Samples `f(x, out)` at the interior nodes.
    ///
    /// The function is also evaluated on the boundary of the box and must
    /// vanish there, otherwise the field could not carry homogeneous
    /// Dirichlet data and is rejected.
    pub fn from_fn<F>(grid: &Grid, shape: FieldShape, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let nc = grid.ncomp(shape);
        let np = grid.num_points();
        let d = grid.dim();
        let mut data = vec![0.0; nc * np];
        let mut buf = vec![0.0; nc];
        let mut scale = 0.0f64;
        for p in 0..np {
            let x = grid.position(p);
            f(&x[..d], &mut buf);
            for (c, v) in buf.iter().enumerate() {
                data[c * np + p] = *v;
                scale = scale.max(v.abs());
            }
        }
        let tol = 1e-9 * scale.max(1.0);
        let m = grid.resolution() + 2;
        let h = grid.spacing();
        let total = m.pow(d as u32);
        for e in 0..total {
            let ext = if d == 1 { [e, 0] } else { [e / m, e % m] };
            let on_boundary = (0..d).any(|a| ext[a] == 0 || ext[a] == m - 1);
            if !on_boundary {
                continue;
            }
            let mut x = [0.0; MAX_DIM];
            for a in 0..d {
                x[a] = ext[a] as f64 * h;
            }
            f(&x[..d], &mut buf);
            if let Some(v) = buf.iter().copied().find(|v| !(v.abs() <= tol)) {
                return Err(Error::BoundaryIncompatible {
                    point: x[..d].to_vec(),
                    value: v,
                });
            }
        }
        Self::from_values(grid, shape, data)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> FieldShape {
        self.shape
    }

    pub fn ncomp(&self) -> usize {
        self.grid.ncomp(self.shape)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let np = self.grid.num_points();
        &self.data[c * np..(c + 1) * np]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let np = self.grid.num_points();
        &mut self.data[c * np..(c + 1) * np]
    }

    #[inline]
    pub fn at(&self, p: usize, c: usize) -> f64 {
        self.data[c * self.grid.num_points() + p]
    }

    #[inline]
    pub fn set(&mut self, p: usize, c: usize, v: f64) {
        let np = self.grid.num_points();
        self.data[c * np + p] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid || self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "{:?} on {:?} vs {:?} on {:?}",
                self.shape, self.grid, other.shape, other.grid
            )));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) -> Result<()> {
        self.check_compatible(other)?;
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Weighted `L2` inner product (`h^d` per node, summed over components).
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_compatible(other)?;
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `(∫ rho |f|^2)^{1/2}`; `rho` must be a scalar field on the same grid.
    pub fn l2_rho(&self, rho: &Field) -> Result<f64> {
        norm(NormInput::Field(self), NormKind::L2Rho, Some(rho))
    }

    pub fn h1(&self) -> f64 {
        norm::h1(self)
    }

    pub fn h2(&self) -> f64 {
        norm::h2(self)
    }

    /// Pure second-derivative norm.
    pub fn w22(&self) -> f64 {
        norm::w22(self)
    }

    /// Changes the declared shape of a field with a matching component count.
    pub fn reshaped(self, shape: FieldShape) -> Result<Field> {
        if self.grid.ncomp(shape) != self.ncomp() {
            return Err(Error::ShapeMismatch(format!(
                "cannot view {:?} as {:?}",
                self.shape, shape
            )));
        }
        Ok(Field { shape, ..self })
    }
}

/// Values on the staggered cell lattice, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    grid: Grid,
    ncomp: usize,
    data: Vec<f64>,
}

impl CellField {
    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: *grid,
            ncomp,
            data: vec![0.0; ncomp * grid.num_cells()],
        }
    }

    /// Wraps component-major cell values.
    pub fn from_values(grid: &Grid, ncomp: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != ncomp * grid.num_cells() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} cell values, got {}",
                ncomp * grid.num_cells(),
                data.len()
            )));
        }
        Ok(Self {
            grid: *grid,
            ncomp,
            data,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, c: usize, comp: usize) -> f64 {
        self.data[comp * self.grid.num_cells() + c]
    }

    #[inline]
    pub fn set(&mut self, c: usize, comp: usize, v: f64) {
        let nc = self.grid.num_cells();
        self.data[comp * nc + c] = v;
    }

    /// Gathers all components at cell `c`.
    pub fn gather(&self, c: usize, out: &mut [f64]) {
        let nc = self.grid.num_cells();
        for (k, o) in out.iter_mut().enumerate().take(self.ncomp) {
            *o = self.data[k * nc + c];
        }
    }

    pub fn l2(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sub(&self, other: &CellField) -> Result<CellField> {
        if self.grid != other.grid || self.ncomp != other.ncomp {
            return Err(Error::ShapeMismatch("cell fields differ".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(CellField { data, ..*self })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_follows_resolution() {
        let g = make_grid(1, 2, 7).unwrap();
        assert_eq!(g.spacing(), 1.0 / 8.0);
        let g = make_grid(2, 1, 31).unwrap();
        assert_eq!(g.spacing(), 1.0 / 32.0);
        assert_eq!(g.num_points(), 31 * 31);
        assert_eq!(g.volume(), 1.0);
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(matches!(make_grid(1, 1, 7), Err(Error::InvalidGrid(_))));
        assert!(make_grid(2, 1, 2).is_err());
        assert!(make_grid(3, 1, 7).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = make_grid(2, 1, 5).unwrap();
        for p in 0..g.num_points() {
            assert_eq!(g.linear_index(g.multi_index(p)), p);
        }
        assert_eq!(g.neighbor(0, 0, -1), None);
        assert_eq!(g.neighbor(0, 1, 1), Some(1));
        assert_eq!(g.neighbor(0, 0, 1), Some(5));
    }

    #[test]
    fn constructor_rejects_boundary_incompatible_profile() {
        let g = make_grid(1, 2, 7).unwrap();
        let ramp = Field::from_fn(&g, FieldShape::Vector, |x, out| {
            out[0] = x[0];
            out[1] = 0.0;
        });
        assert!(matches!(ramp, Err(Error::BoundaryIncompatible { .. })));
        let sine = Field::from_fn(&g, FieldShape::Vector, |x, out| {
            out[0] = (std::f64::consts::PI * x[0]).sin();
            out[1] = 0.0;
        });
        assert!(sine.is_ok());
    }

    #[test]
    fn from_values_rejects_nan() {
        let g = make_grid(1, 2, 3).unwrap();
        let mut v = vec![0.0; 6];
        v[2] = f64::NAN;
        assert!(Field::from_values(&g, FieldShape::Vector, v).is_err());
        assert!(Field::from_values(&g, FieldShape::Vector, vec![0.0; 5]).is_err());
    }
}
