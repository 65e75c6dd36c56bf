//! Derivative stack of `Y ↦ ψ(‖Y‖²_F)` from the scalar derivatives of `ψ`.
//!
//! With `q = ‖Y‖²`, `∂_a q = 2 Y_a` and `∂_a ∂_b q = 2 δ_ab`, so
//! ```text
//! ∂_a       = 2ψ' Y_a
//! ∂_ab      = 4ψ'' Y_a Y_b + 2ψ' δ_ab
//! ∂_abc     = 8ψ''' Y_a Y_b Y_c + 4ψ'' (δ_ab Y_c + δ_ac Y_b + δ_bc Y_a)
//! ∂_abce    = 16ψ'''' Y_a Y_b Y_c Y_e + 8ψ''' Σ_{6 pairings} δ Y Y + 4ψ'' Σ_{3 pairings} δ δ
//! ```

/// `[ψ, ψ', ψ'', ψ''', ψ'''']` evaluated at `q`.
pub(crate) type Profile = [f64; 5];

#[inline]
fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn grad(y: &[f64], p: &Profile, out: &mut [f64]) {
    for (o, ya) in out.iter_mut().zip(y) {
        *o = 2.0 * p[1] * ya;
    }
}

pub(crate) fn hess(y: &[f64], p: &Profile, out: &mut [f64]) {
    let m = y.len();
    for a in 0..m {
        for b in 0..m {
            out[a * m + b] = 4.0 * p[2] * y[a] * y[b] + 2.0 * p[1] * delta(a, b);
        }
    }
}

pub(crate) fn third(y: &[f64], p: &Profile, out: &mut [f64]) {
    let m = y.len();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                let pair = delta(a, b) * y[c] + delta(a, c) * y[b] + delta(b, c) * y[a];
                out[(a * m + b) * m + c] = 8.0 * p[3] * y[a] * y[b] * y[c] + 4.0 * p[2] * pair;
            }
        }
    }
}

pub(crate) fn fourth(y: &[f64], p: &Profile, out: &mut [f64]) {
    let m = y.len();
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for e in 0..m {
                    let quad = y[a] * y[b] * y[c] * y[e];
                    let pairs = delta(a, b) * y[c] * y[e]
                        + delta(a, c) * y[b] * y[e]
                        + delta(a, e) * y[b] * y[c]
                        + delta(b, c) * y[a] * y[e]
                        + delta(b, e) * y[a] * y[c]
                        + delta(c, e) * y[a] * y[b];
                    let dd = delta(a, b) * delta(c, e)
                        + delta(a, c) * delta(b, e)
                        + delta(a, e) * delta(b, c);
                    out[((a * m + b) * m + c) * m + e] =
                        16.0 * p[4] * quad + 8.0 * p[3] * pairs + 4.0 * p[2] * dd;
                }
            }
        }
    }
}

/// `sup_{r ≥ 0} r^p / (1 + r)^k` for `0 ≤ p < k`.
pub(crate) fn sup_ratio(p: f64, k: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    let r = p / (k - p);
    r.powf(p) / (1.0 + r).powf(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_ratio_matches_scan() {
        for (p, k) in [(0.5, 2.0), (1.0, 3.0), (1.5, 4.0), (2.0, 5.0), (0.5, 3.0), (1.0, 4.0)] {
            let scan = (0..200_000)
                .map(|i| {
                    let r = i as f64 * 1e-4;
                    r.powf(p) / (1.0 + r).powf(k)
                })
                .fold(0.0, f64::max);
            let s = sup_ratio(p, k);
            assert!(s >= scan && s - scan < 1e-8, "p={p} k={k}");
        }
    }

    #[test]
    fn quadratic_profile_has_constant_hessian() {
        let y = [0.3, -1.2, 2.0, 0.1];
        let p = [0.0, 1.5, 0.0, 0.0, 0.0];
        let mut h = vec![0.0; 16];
        hess(&y, &p, &mut h);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(h[a * 4 + b], if a == b { 3.0 } else { 0.0 });
            }
        }
    }
}
