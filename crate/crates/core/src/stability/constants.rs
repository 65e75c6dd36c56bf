use serde::Serialize;

use super::gronwall::expm1_ratio;
use crate::cordes::CordesConstants;
use crate::dynamics::AprioriBounds;
use crate::energy::{BoundsTable, ConicMaterial};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// `Σ α_K μ_K^{[2]} / Σ α_K κ_K^{[1]}`.
pub fn cbar(material: &ConicMaterial) -> f64 {
    material.weighted_bound(|b| b.mu2) / material.kappa()
}

/// Bound for the embedding `W^{1,1}(0,T; L²) → L^∞(0,T; L²)`.
///
/// `‖g(t)‖ ≤ ‖g(s)‖ + ∫|ġ|` for every `s`; averaging over `s` gives
/// `sup ‖g‖ ≤ max(1, 1/T) ‖g‖_{W^{1,1}}`.
pub fn embedding_bound(t_final: f64) -> f64 {
    1.0f64.max(1.0 / t_final)
}

/// Every constant of the stability estimate for one material and one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityConstants {
    pub cbar: f64,
    /// `Ĉ(α)` as used (exponent −2 on `κ`).
    pub chat: f64,
    /// The exponent −1 variant, reported only.
    pub chat_inv_kappa: f64,
    /// `x = (nd)² M₁ C̄ / 2`, the common growth rate.
    pub growth: f64,
    /// `E(α) = exp(x T)`.
    pub e_alpha: f64,
    /// `F(α) = exp(x T) / x`; infinite when `x = 0`.
    pub f_alpha: f64,
    /// `(exp(x T) - 1) / x`.
    pub expm1_factor: f64,
    pub c0: f64,
    /// With `Σ α_K μ_K^{[1]}` under the root (used downstream).
    pub c1: f64,
    /// With `Σ α_K μ_K^{[2]}` under the root, reported only.
    pub c1_mu2: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// The bracketed coefficients of the `H²` bound.
    pub c2_h2: f64,
    pub c3_h2: f64,
    pub c5_h2: f64,
    pub embed_bound: f64,
    pub cbar0: f64,
    pub cbar1: f64,
    pub cbar2: f64,
    pub kappa: f64,
    pub mu: f64,
    pub apriori: AprioriBounds,
    pub t_final: f64,
    pub n: usize,
    pub d: usize,
    pub volume: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub khat: f64,
    pub epsilon: f64,
    pub tilde_u0_h2: f64,
}

impl StabilityConstants {
    /// `(exp(x τ) - 1) / x` at an intermediate time.
    pub fn expm1_at(&self, tau: f64) -> f64 {
        expm1_ratio(self.growth, tau)
    }

    /// `exp(x τ)`.
    pub fn exp_at(&self, tau: f64) -> f64 {
        (self.growth * tau).exp()
    }

    /// Rows `(name, value)` in a fixed order, for tables.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("cbar", self.cbar),
            ("chat", self.chat),
            ("chat_inv_kappa", self.chat_inv_kappa),
            ("e_alpha", self.e_alpha),
            ("f_alpha", self.f_alpha),
            ("c0", self.c0),
            ("c1", self.c1),
            ("c1_mu2", self.c1_mu2),
            ("c2", self.c2),
            ("c3", self.c3),
            ("c4", self.c4),
            ("c5", self.c5),
            ("embed_bound", self.embed_bound),
            ("cbar0", self.cbar0),
            ("cbar1", self.cbar1),
            ("cbar2", self.cbar2),
            ("kappa", self.kappa),
            ("mu", self.mu),
            ("m0", self.apriori.m0),
            ("m1", self.apriori.m1),
            ("m2", self.apriori.m2),
            ("m3", self.apriori.m3),
            ("t_final", self.t_final),
            ("volume", self.volume),
            ("rho_min", self.rho_min),
            ("rho_max", self.rho_max),
            ("khat", self.khat),
            ("epsilon", self.epsilon),
            ("tilde_u0_h2", self.tilde_u0_h2),
        ]
    }
}

/// `a · b` with `0 · ∞ = 0`.
pub(crate) fn times(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn sum_all(material: &ConicMaterial, f: impl Fn(&BoundsTable) -> f64) -> f64 {
    material.models().iter().map(|m| f(m.bounds())).sum()
}

/// Evaluates `C₀ … C₅`, `E`, `F` and the three constants of the final estimate.
pub fn stability_constants(
    material: &ConicMaterial,
    apriori: &AprioriBounds,
    grid: &Grid,
    t_final: f64,
    cordes: &CordesConstants,
    tilde_u0_h2: f64,
) -> Result<StabilityConstants> {
    if !(cordes.epsilon > 0.0 && cordes.epsilon <= 1.0) {
        return Err(Error::CordesFailed(format!(
            "epsilon {} outside (0, 1]",
            cordes.epsilon
        )));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("final time {t_final} must be positive")));
    }
    if material.dim() != grid.dim() {
        return Err(Error::ShapeMismatch("material and grid dimensions differ".into()));
    }
    let n = grid.components() as f64;
    let d = grid.dim() as f64;
    let nd = n * d;
    let vol = grid.volume();
    let sv = vol.sqrt();
    let AprioriBounds { m0, m1, m2, m3 } = *apriori;
    let rho_min = material.rho_min();
    let rho_max = material.rho_max();
    let kappa = material.kappa();
    let mu = material.mu();
    let w = |f: &dyn Fn(&BoundsTable) -> f64| material.weighted_bound(f);
    let r2 = 2.0f64.sqrt();
    let r3 = 3.0f64.sqrt();
    let r6 = 6.0f64.sqrt();

    let cb = cbar(material);
    let growth = nd * nd * m1 * cb / 2.0;
    let e = (growth * t_final).exp();
    let f = if growth > 0.0 { e / growth } else { f64::INFINITY };
    let phi = expm1_ratio(growth, t_final);
    let embed = embedding_bound(t_final);
    let cc = embed.max(1.0);

    let c0 = 3.0 * nd * e * w(&|b| b.mu1 + n * d.powf(1.5) * m3 * b.mu2 + d.sqrt() * b.mu5);
    let c1 = e * w(&|b| b.mu1).sqrt();
    let c1_mu2 = e * w(&|b| b.mu2).sqrt();
    let c2 = e * sum_all(material, |b| r6 * nd * b.mu1 * tilde_u0_h2 + (6.0 * vol).sqrt() * n.sqrt() * d * b.mu4)
        + 2.0 * r2 * nd * nd / rho_min
            * phi
            * sum_all(material, |b| sv * m2 * b.mu1 + n.sqrt() * d * m0 * m1 * b.mu2 + sv * m1 * b.mu6);
    let c3 = 2.0 * r2 * nd.powf(2.5) / rho_min
        * phi
        * w(&|b| m2 * b.mu2 + nd * m1 * m3 * b.mu3 + m1 * b.mu7);
    let c4 = 2.0 * r2 * n.powf(2.5) * d * d * m1 * e / rho_min * w(&|b| b.mu2);
    let c5 = 2.0 * r3 * e * rho_max * cc + 2.0 * phi * cc;

    let c2_h2 = c2 + n.sqrt() * d * sum_all(material, |b| n.sqrt() * d * d * b.mu1 + sv * b.mu4);
    let c3_h2 = c3 + n * d.sqrt() * w(&|b| nd * m3 * b.mu2 + b.mu5);
    let c5_h2 = c5 + rho_max;

    // Composition of the three intermediate bounds into the final estimate;
    // the initial data enter through Q = [μ ‖δu₀‖²_{H²} + ‖δu₁‖_{H¹}]^{1/2}.
    let chat = cordes.chat();
    let g = chat * (cb * c4 * t_final).exp();
    let sk = kappa.sqrt();
    let r = 1.0f64.max(1.0 / rho_min.sqrt());
    let a0 = e * 1.0f64.max(rho_max.sqrt());
    let a1 = times(f, cc);
    let a2 = times(
        f,
        sum_all(material, |b| sv * n.sqrt() * d * b.mu4 + n * d * d * m0 * b.mu1) / rho_min,
    );
    let h0 = g * (c0 / mu.sqrt() + c1 + c3_h2 * a0 / sk);
    let h1 = g * (c5_h2 + times(c3_h2, a1) / sk);
    let h2 = g * (c2_h2 + times(c3_h2, a2) / sk);
    let b0 = c0 / mu.sqrt() + c1 + c3 * a0 / sk + c4 * t_final * h0;
    let b1 = c5 + times(c3, a1) / sk + times(c4 * t_final, h1);
    let b2 = c2 + times(c3, a2) / sk + times(c4 * t_final, h2);

    Ok(StabilityConstants {
        cbar: cb,
        chat,
        chat_inv_kappa: cordes.chat_inv_kappa,
        growth,
        e_alpha: e,
        f_alpha: f,
        expm1_factor: phi,
        c0,
        c1,
        c1_mu2,
        c2,
        c3,
        c4,
        c5,
        c2_h2,
        c3_h2,
        c5_h2,
        embed_bound: embed,
        cbar0: r * (a0 + b0) + h0,
        cbar1: r * (a1 + b1) + h1,
        cbar2: r * (a2 + b2) + h2,
        kappa,
        mu,
        apriori: *apriori,
        t_final,
        n: grid.components(),
        d: grid.dim(),
        volume: vol,
        rho_min,
        rho_max,
        khat: cordes.khat,
        epsilon: cordes.epsilon,
        tilde_u0_h2,
    })
}
