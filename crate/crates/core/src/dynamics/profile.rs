//! Named analytic profiles that vanish on the boundary of the unit box.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, FieldShape, Grid};

/// Names accepted in the `profile` tag.
pub const PROFILE_NAMES: [&str; 2] = ["sine", "bump"];

/// One scalar profile placed on a single displacement component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum ProfileTerm {
    /// `amplitude · Π_i sin(k_i π x_i)`.
    Sine {
        component: usize,
        amplitude: f64,
        modes: Vec<usize>,
    },
    /// Gaussian bump cut off by `Π_i 4 x_i (1 - x_i)`.
    Bump {
        component: usize,
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

impl ProfileTerm {
    pub fn sine(component: usize, amplitude: f64, modes: Vec<usize>) -> Self {
        ProfileTerm::Sine {
            component,
            amplitude,
            modes,
        }
    }

    pub fn component(&self) -> usize {
        match self {
            ProfileTerm::Sine { component, .. } | ProfileTerm::Bump { component, .. } => *component,
        }
    }

    fn amplitude(&self) -> f64 {
        match self {
            ProfileTerm::Sine { amplitude, .. } | ProfileTerm::Bump { amplitude, .. } => *amplitude,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.component() >= n {
            return bad(format!(
                "profile component {} out of range for n = {n}",
                self.component()
            ));
        }
        if !self.amplitude().is_finite() {
            return bad("profile amplitude is not finite".into());
        }
        match self {
            ProfileTerm::Sine { modes, .. } => {
                if modes.len() != d {
                    return bad(format!("sine profile needs {d} modes, got {}", modes.len()));
                }
                if modes.contains(&0) {
                    return bad("sine modes start at 1".into());
                }
            }
            ProfileTerm::Bump { center, width, .. } => {
                if center.len() != d {
                    return bad(format!("bump centre needs {d} coordinates, got {}", center.len()));
                }
                if !(*width > 0.0 && width.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                    return bad(format!("bump needs a finite centre and positive width, got {width}"));
                }
            }
        }
        Ok(())
    }

    /// Value and first two derivatives of the factor along `axis`.
    fn factor(&self, axis: usize, s: f64) -> [f64; 3] {
        match self {
            ProfileTerm::Sine { modes, .. } => {
                let w = modes[axis] as f64 * PI;
                let (sn, cs) = (w * s).sin_cos();
                [sn, w * cs, -w * w * sn]
            }
            ProfileTerm::Bump { center, width, .. } => {
                let r = s - center[axis];
                let w2 = width * width;
                let g = (-0.5 * r * r / w2).exp();
                let g1 = -r / w2 * g;
                let g2 = (r * r / (w2 * w2) - 1.0 / w2) * g;
                let (q, q1, q2) = (4.0 * s * (1.0 - s), 4.0 - 8.0 * s, -8.0);
                [g * q, g1 * q + g * q1, g2 * q + 2.0 * g1 * q1 + g * q2]
            }
        }
    }

    /// Scalar value, gradient and Hessian (row-major `d x d`).
    fn eval(&self, x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = x.len();
        let f: Vec<[f64; 3]> = (0..d).map(|a| self.factor(a, x[a])).collect();
        let amp = self.amplitude();
        let prod_except = |skip: &[usize], order: &[(usize, usize)]| {
            let mut v = amp;
            for (a, fa) in f.iter().enumerate() {
                if skip.contains(&a) {
                    continue;
                }
                v *= fa[0];
            }
            for &(a, o) in order {
                v *= f[a][o];
            }
            v
        };
        for l in 0..d {
            grad[l] = prod_except(&[l], &[(l, 1)]);
            for j in 0..d {
                hess[l * d + j] = if l == j {
                    prod_except(&[l], &[(l, 2)])
                } else {
                    prod_except(&[l, j], &[(l, 1), (j, 1)])
                };
            }
        }
        prod_except(&[], &[])
    }
}

/// Sum of [`ProfileTerm`]s forming an `n`-vector field.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorProfile {
    terms: Vec<ProfileTerm>,
}

impl VectorProfile {
    pub fn new(terms: Vec<ProfileTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn terms(&self) -> &[ProfileTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude() == 0.0)
    }

    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate(n, d))
    }

    /// Writes the `n` components at `x`.
    pub fn value(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for t in &self.terms {
            out[t.component()] += t.eval(x, &mut g, &mut h);
        }
    }

    /// `∂_l u_k` at `(k, l)` → `k d + l`.
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for t in &self.terms {
            t.eval(x, &mut g, &mut h);
            for l in 0..d {
                out[t.component() * d + l] += g[l];
            }
        }
    }

    /// `∂_l ∂_j u_k` at `(k d + l) d + j`.
    pub fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for t in &self.terms {
            t.eval(x, &mut g, &mut h);
            let base = t.component() * d * d;
            for (o, v) in out[base..base + d * d].iter_mut().zip(&h) {
                *o += v;
            }
        }
    }

    /// Samples the profile at the interior nodes of `grid`.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        self.validate(grid.components(), grid.dim())?;
        Field::from_fn(grid, FieldShape::Vector, |x, out| self.value(x, out))
    }
}

/// `cos(ω t + φ)` and its time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Harmonic {
    /// Constant in time.
    pub const STEADY: Harmonic = Harmonic {
        omega: 0.0,
        phase: 0.0,
    };

    pub fn new(omega: f64, phase: f64) -> Self {
        Self { omega, phase }
    }

    /// `d^order/dt^order cos(ω t + φ)`.
    pub fn derivative(&self, t: f64, order: u32) -> f64 {
        let arg = self.omega * t + self.phase + 0.5 * PI * order as f64;
        if order > 0 && self.omega == 0.0 {
            return 0.0;
        }
        self.omega.powi(order as i32) * arg.cos()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }
}

impl Default for Harmonic {
    fn default() -> Self {
        Self::STEADY
    }
}
