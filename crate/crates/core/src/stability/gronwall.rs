use serde::Serialize;

use crate::error::{Error, Result};

/// Nonnegative piecewise-constant function on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    /// `values[i]` on `[breaks[i], breaks[i+1])`; `breaks` starts at 0 and increases.
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} break points for {} values",
                breaks.len(),
                values.len()
            )));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "break points must start at 0 and increase strictly".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("step values must be finite and nonnegative".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(value: f64, t_end: f64) -> Result<Self> {
        Self::new(vec![0.0, t_end], vec![value])
    }

    pub fn end(&self) -> f64 {
        *self.breaks.last().expect("at least two break points")
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn value_on(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|b| *b <= t).saturating_sub(1);
        self.values[i.min(self.values.len() - 1)]
    }
}

/// Data of the integral inequality `ψ(τ) ≤ a + ∫ b ψ + ∫ k ψ^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GronwallProblem {
    pub a: f64,
    pub b: StepFunction,
    pub k: StepFunction,
    pub p: f64,
}

/// `(e^{y} - 1) / y · t` with `y = x t`, stable near `x = 0`.
pub fn expm1_ratio(x: f64, t: f64) -> f64 {
    let y = x * t;
    if y.abs() < 1e-6 {
        t * (1.0 + y / 2.0 + y * y / 6.0)
    } else {
        y.exp_m1() / x
    }
}

/// `exp(∫₀^τ b) [a^{1-p} + (1-p) ∫₀^τ k(t) exp((p-1) ∫₀^t b) dt]^{1/(1-p)}`,
/// integrated exactly on the common refinement of the step functions.
pub fn gronwall_bound(prob: &GronwallProblem, tau: f64) -> Result<f64> {
    let p = prob.p;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("exponent p = {p} not in (0, 1)")));
    }
    if !(prob.a >= 0.0 && prob.a.is_finite()) {
        return Err(Error::InvalidParameter(format!("a = {} must be nonnegative", prob.a)));
    }
    let t_end = prob.b.end().min(prob.k.end());
    if !(0.0..=t_end * (1.0 + 1e-12)).contains(&tau) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside [0, {t_end}]")));
    }
    let mut knots: Vec<f64> = prob
        .b
        .breaks()
        .iter()
        .chain(prob.k.breaks())
        .copied()
        .filter(|t| *t < tau)
        .chain([tau])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let q = p - 1.0;
    let mut big_b = 0.0;
    let mut integral = 0.0;
    for w in knots.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let len = t1 - t0;
        let bi = prob.b.value_on(t0);
        let ki = prob.k.value_on(t0);
        integral += ki * (q * big_b).exp() * expm1_ratio(q * bi, len);
        big_b += bi * len;
    }
    let inner = prob.a.powf(1.0 - p) + (1.0 - p) * integral;
    Ok(big_b.exp() * inner.powf(1.0 / (1.0 - p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn problem(a: f64, b: f64, k: f64, p: f64) -> GronwallProblem {
        GronwallProblem {
            a,
            b: StepFunction::constant(b, 2.0).unwrap(),
            k: StepFunction::constant(k, 2.0).unwrap(),
            p,
        }
    }

    #[test]
    fn closed_forms() {
        let tau = 1.3;
        assert!((gronwall_bound(&problem(2.5, 0.0, 0.0, 0.3), tau).unwrap() - 2.5).abs() < 1e-12);
        let v = gronwall_bound(&problem(2.0, 0.0, 0.7, 0.5), tau).unwrap();
        assert!((v - (2.0f64.sqrt() + 0.35 * tau).powi(2)).abs() < 1e-12);
        let v = gronwall_bound(&problem(1.5, 0.8, 0.0, 0.4), tau).unwrap();
        assert!((v - 1.5 * (0.8 * tau).exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gronwall_bound(&problem(1.0, 0.0, 0.0, 1.0), 0.5).is_err());
        assert!(gronwall_bound(&problem(1.0, 0.0, 0.0, 0.5), 3.0).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(StepFunction::new(vec![0.0, 1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn piecewise_b_matches_exponential() {
        let b = StepFunction::new(vec![0.0, 0.5, 1.0, 2.0], vec![1.0, 0.0, 3.0]).unwrap();
        let prob = GronwallProblem {
            a: 0.7,
            b,
            k: StepFunction::constant(0.0, 2.0).unwrap(),
            p: 0.5,
        };
        let v = gronwall_bound(&prob, 1.5).unwrap();
        assert!((v - 0.7 * (0.5 + 1.5f64).exp()).abs() < 1e-12);
    }

    fn steps() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        prop::collection::vec((0.05f64..1.0, 0.0f64..2.0), 1..6).prop_map(|v| {
            let mut t = 0.0;
            let mut breaks = vec![0.0];
            let mut vals = Vec::new();
            for (len, val) in v {
                t += len;
                breaks.push(t);
                vals.push(val);
            }
            (breaks, vals)
        })
    }

    proptest! {
        #[test]
        fn monotone_in_every_argument(
            (bb, bv) in steps(),
            (kb, kv) in steps(),
            a in 0.0f64..3.0,
            p in 0.05f64..0.95,
            frac in 0.0f64..1.0,
            bump in 0.0f64..1.0,
        ) {
            let b = StepFunction::new(bb.clone(), bv.clone()).unwrap();
            let k = StepFunction::new(kb.clone(), kv.clone()).unwrap();
            let t_end = b.end().min(k.end());
            let tau = frac * t_end;
            let base = GronwallProblem { a, b, k, p };
            let v = gronwall_bound(&base, tau).unwrap();
            let floor = v * (1.0 - 1e-12);
            let more_a = GronwallProblem { a: a + bump, ..base.clone() };
            prop_assert!(gronwall_bound(&more_a, tau).unwrap() >= floor);
            let later = (tau + bump * (t_end - tau)).min(t_end);
            prop_assert!(gronwall_bound(&base, later).unwrap() >= floor);
            let b_up = StepFunction::new(bb, bv.iter().map(|x| x + bump).collect()).unwrap();
            let more_b = GronwallProblem { b: b_up, ..base.clone() };
            prop_assert!(gronwall_bound(&more_b, tau).unwrap() >= floor);
            let k_up = StepFunction::new(kb, kv.iter().map(|x| x + bump).collect()).unwrap();
            let more_k = GronwallProblem { k: k_up, ..base.clone() };
            prop_assert!(gronwall_bound(&more_k, tau).unwrap() >= floor);
        }
    }
}
