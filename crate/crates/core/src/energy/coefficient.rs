use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, FieldShape, Grid};

/// Smooth scalar function of position on the unit box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialCoefficient {
    Constant { value: f64 },
    /// `base + gradient · x`.
    Affine { base: f64, gradient: Vec<f64> },
    /// `base + amplitude · Π_i sin(π x_i)`.
    Bump { base: f64, amplitude: f64 },
}

impl SpatialCoefficient {
    pub fn constant(value: f64) -> Self {
        SpatialCoefficient::Constant { value }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SpatialCoefficient::Constant { value } => *value,
            SpatialCoefficient::Affine { base, gradient } => {
                base + gradient.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>()
            }
            SpatialCoefficient::Bump { base, amplitude } => {
                base + amplitude * x.iter().map(|xi| (PI * xi).sin()).product::<f64>()
            }
        }
    }

    /// `∂_axis` of the coefficient at `x`.
    pub fn derivative(&self, x: &[f64], axis: usize) -> f64 {
        match self {
            SpatialCoefficient::Constant { .. } => 0.0,
            SpatialCoefficient::Affine { gradient, .. } => gradient.get(axis).copied().unwrap_or(0.0),
            SpatialCoefficient::Bump { amplitude, .. } => {
                if axis >= x.len() {
                    return 0.0;
                }
                let mut v = amplitude * PI * (PI * x[axis]).cos();
                for (i, xi) in x.iter().enumerate() {
                    if i != axis {
                        v *= (PI * xi).sin();
                    }
                }
                v
            }
        }
    }

    /// Infimum over the closed unit box of dimension `d`.
    pub fn min(&self, d: usize) -> f64 {
        match self {
            SpatialCoefficient::Constant { value } => *value,
            SpatialCoefficient::Affine { base, gradient } => {
                base + gradient.iter().take(d).map(|g| g.min(0.0)).sum::<f64>()
            }
            SpatialCoefficient::Bump { base, amplitude } => base + amplitude.min(0.0),
        }
    }

    /// Supremum over the closed unit box of dimension `d`.
    pub fn max(&self, d: usize) -> f64 {
        match self {
            SpatialCoefficient::Constant { value } => *value,
            SpatialCoefficient::Affine { base, gradient } => {
                base + gradient.iter().take(d).map(|g| g.max(0.0)).sum::<f64>()
            }
            SpatialCoefficient::Bump { base, amplitude } => base + amplitude.max(0.0),
        }
    }

    /// Largest `|∂_l c|` over the box and over axes.
    pub fn sup_derivative(&self) -> f64 {
        match self {
            SpatialCoefficient::Constant { .. } => 0.0,
            SpatialCoefficient::Affine { gradient, .. } => {
                gradient.iter().fold(0.0, |m, g| m.max(g.abs()))
            }
            SpatialCoefficient::Bump { amplitude, .. } => PI * amplitude.abs(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SpatialCoefficient::Constant { value } => value.is_finite(),
            SpatialCoefficient::Affine { base, gradient } => {
                base.is_finite() && gradient.iter().all(|g| g.is_finite())
            }
            SpatialCoefficient::Bump { base, amplitude } => base.is_finite() && amplitude.is_finite(),
        }
    }

    /// Samples the coefficient at the interior nodes.
    pub fn sample(&self, grid: &Grid) -> Field {
        let d = grid.dim();
        let data = (0..grid.num_points())
            .map(|p| self.value(&grid.position(p)[..d]))
            .collect();
        Field::from_values(grid, FieldShape::Scalar, data)
            .expect("finite coefficient sampled on its own grid")
    }

    pub(crate) fn require_positive(&self, what: &str, d: usize) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidParameter(format!("{what} is not finite")));
        }
        let lo = self.min(d);
        if !(lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{what} must be positive, infimum is {lo}"
            )));
        }
        Ok(())
    }
}

impl From<f64> for SpatialCoefficient {
    fn from(value: f64) -> Self {
        SpatialCoefficient::Constant { value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_extrema_and_derivative() {
        let c = SpatialCoefficient::Affine {
            base: 1.0,
            gradient: vec![0.5, -0.25],
        };
        assert_eq!(c.min(2), 0.75);
        assert_eq!(c.max(2), 1.5);
        assert_eq!(c.max(1), 1.5);
        assert_eq!(c.derivative(&[0.3, 0.1], 1), -0.25);
        assert_eq!(c.sup_derivative(), 0.5);
    }

    #[test]
    fn bump_derivative_matches_difference_quotient() {
        let c = SpatialCoefficient::Bump {
            base: 0.2,
            amplitude: 0.1,
        };
        let x = [0.31, 0.77];
        let h = 1e-6;
        for axis in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fd = (c.value(&xp) - c.value(&xm)) / (2.0 * h);
            assert!((fd - c.derivative(&x, axis)).abs() < 1e-8);
        }
        assert!((c.max(2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn serde_roundtrip() {
        let c = SpatialCoefficient::Bump {
            base: 1.0,
            amplitude: -0.2,
        };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"kind\":\"bump\""));
        let back: SpatialCoefficient = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
