//! JSON experiment configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Forcing, Harmonic, ProblemInstance, VectorProfile, DEFAULT_CFL, PROFILE_NAMES};
use crate::energy::{
    anisotropic_model, conic_combine, quadratic_model, saturating_model, ConicMaterial, SpatialCoefficient,
    StoredEnergy,
};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// A spatial coefficient given either as a bare number or in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Value(f64),
    Field(SpatialCoefficient),
}

impl CoefficientSpec {
    pub fn resolve(&self) -> SpatialCoefficient {
        match self {
            CoefficientSpec::Value(v) => SpatialCoefficient::constant(*v),
            CoefficientSpec::Field(c) => c.clone(),
        }
    }
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Value(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `c(x) ‖Y‖²`.
    Quadratic { c: CoefficientSpec },
    Saturating { a: f64, b: CoefficientSpec, s: f64 },
    /// `Σ_a w_a Y_a²`; `weights` has `n d` entries.
    Anisotropic { weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub models: Vec<ModelConfig>,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub rho: CoefficientSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingConfig {
    pub profile: VectorProfile,
    #[serde(default)]
    pub temporal: Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "VectorProfile::zero")]
    pub u0: VectorProfile,
    #[serde(default = "VectorProfile::zero")]
    pub u1: VectorProfile,
    #[serde(default)]
    pub forcing: Option<ForcingConfig>,
    pub t_final: f64,
    /// Courant number; ignored when `dt` is set.
    #[serde(default)]
    pub cfl: Option<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
}

/// Magnitudes of the random data perturbations, one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Bound on `‖δu₀‖_{H²}`.
    pub u0: f64,
    /// Bound on `‖δu₁‖_{H¹}`.
    pub u1: f64,
    /// Bound on `‖δf‖_{W^{1,1}(0,T;L²)}`.
    pub f: f64,
    /// Bound on `max_K |δα_K|`.
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    /// Number of sine modes mixed into each perturbation.
    pub modes: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            u0: 0.0,
            u1: 0.0,
            f: 0.0,
            alpha: 0.0,
            trials: 1,
            seed: 0,
            modes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// File name of the per-trial report inside `directory`.
    pub report: String,
    pub dump_fields: bool,
    /// Relative slack on the bound checks.
    pub slack: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            report: "report.csv".into(),
            dump_fields: false,
            slack: 0.05,
        }
    }
}

/// Right-hand side and tolerance for `solve-elliptic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticConfig {
    pub rhs: Option<VectorProfile>,
    pub tolerance: f64,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        EllipticConfig {
            rhs: None,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub material: MaterialConfig,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub elliptic: EllipticConfig,
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let hint = if e.to_string().contains("profile") {
            format!(" (available profiles: {})", PROFILE_NAMES.join(", "))
        } else {
            String::new()
        };
        Error::config(format!("line {}, column {}", e.line(), e.column()), format!("{e}{hint}"))
    })?;
    cfg.validate_with(text)?;
    Ok(cfg)
}

/// SHA-256 of the config with keys sorted, so reordering keys keeps the hash.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_value(cfg)?;
    Ok(hex::encode(Sha256::digest(canonical.to_string().as_bytes())))
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, path: &str, key: &str, message: impl Into<String>) -> Error {
        let at = match line_of(self.text, key) {
            Some(line) => format!("{path} (line {line})"),
            None => path.to_string(),
        };
        Error::config(at, message)
    }
}

impl ExperimentConfig {
    /// Checks every invariant; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        let ck = Checker { text };
        let GridConfig { d, n, resolution } = self.grid;
        Grid::new(d, n, resolution).map_err(|e| ck.fail("grid", "grid", e.to_string()))?;

        let mat = &self.material;
        if mat.models.is_empty() {
            return Err(ck.fail("material.models", "models", "at least one model is required"));
        }
        if mat.alpha.len() != mat.models.len() {
            return Err(ck.fail(
                "material.alpha",
                "alpha",
                format!("{} weights for {} models", mat.alpha.len(), mat.models.len()),
            ));
        }
        for (k, a) in mat.alpha.iter().enumerate() {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(ck.fail(&format!("material.alpha[{k}]"), "alpha", format!("must be nonnegative, got {a}")));
            }
        }
        if !mat.alpha.iter().any(|a| *a > 0.0) {
            return Err(ck.fail("material.alpha", "alpha", "at least one weight must be positive"));
        }
        for (k, m) in mat.models.iter().enumerate() {
            if let ModelConfig::Anisotropic { weights } = m {
                if weights.len() != n * d {
                    return Err(ck.fail(
                        &format!("material.models[{k}].weights"),
                        "weights",
                        format!("need n d = {} weights, got {}", n * d, weights.len()),
                    ));
                }
            }
            build_model(m, d).map_err(|e| ck.fail(&format!("material.models[{k}]"), "models", e.to_string()))?;
        }
        mat.rho
            .resolve()
            .require_positive("rho", d)
            .map_err(|e| ck.fail("material.rho", "rho", e.to_string()))?;

        let p = &self.problem;
        if !(p.t_final > 0.0 && p.t_final.is_finite()) {
            return Err(ck.fail("problem.t_final", "t_final", format!("must be positive, got {}", p.t_final)));
        }
        for (name, prof) in [("u0", &p.u0), ("u1", &p.u1)] {
            prof.validate(n, d)
                .map_err(|e| ck.fail(&format!("problem.{name}"), name, e.to_string()))?;
        }
        if let Some(f) = &p.forcing {
            f.profile
                .validate(n, d)
                .map_err(|e| ck.fail("problem.forcing.profile", "forcing", e.to_string()))?;
        }
        if let Some(c) = p.cfl {
            if !(c > 0.0 && c <= 1.0) {
                return Err(ck.fail("problem.cfl", "cfl", format!("must lie in (0, 1], got {c}")));
            }
        }
        if let Some(dt) = p.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ck.fail("problem.dt", "dt", format!("must be positive, got {dt}")));
            }
        }

        let q = &self.perturbation;
        for (name, v) in [("u0", q.u0), ("u1", q.u1), ("f", q.f), ("alpha", q.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ck.fail(
                    &format!("perturbation.{name}"),
                    "perturbation",
                    format!("magnitude must be nonnegative, got {v}"),
                ));
            }
        }
        if q.trials == 0 {
            return Err(ck.fail("perturbation.trials", "trials", "need at least one trial"));
        }
        if q.modes == 0 {
            return Err(ck.fail("perturbation.modes", "modes", "need at least one mode"));
        }
        if self.output.report.is_empty() || self.output.report.contains(['/', '\\']) {
            return Err(ck.fail("output.report", "report", "must be a plain file name"));
        }
        if !(self.output.slack >= 0.0) {
            return Err(ck.fail("output.slack", "slack", "must be nonnegative"));
        }
        if let Some(rhs) = &self.elliptic.rhs {
            rhs.validate(n, d)
                .map_err(|e| ck.fail("elliptic.rhs", "rhs", e.to_string()))?;
        }
        if !(self.elliptic.tolerance > 0.0) {
            return Err(ck.fail("elliptic.tolerance", "tolerance", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.d, self.grid.n, self.grid.resolution)
    }

    pub fn material(&self) -> Result<ConicMaterial> {
        let d = self.grid.d;
        let models = self
            .material
            .models
            .iter()
            .map(|m| build_model(m, d))
            .collect::<Result<Vec<_>>>()?;
        conic_combine(models, self.material.alpha.clone(), self.material.rho.resolve(), d)
    }

    pub fn forcing(&self) -> Forcing {
        match &self.problem.forcing {
            Some(f) => Forcing::separable(f.profile.clone(), f.temporal),
            None => Forcing::Zero,
        }
    }

    /// The unperturbed problem.
    pub fn problem(&self) -> Result<ProblemInstance> {
        let grid = self.grid()?;
        let u0: Field = self.problem.u0.sample(&grid)?;
        let u1: Field = self.problem.u1.sample(&grid)?;
        let base = ProblemInstance::new(self.material()?, u0, u1, self.forcing(), self.problem.t_final)?;
        match self.problem.dt {
            Some(dt) => base.with_dt(dt),
            None => base.with_cfl(self.problem.cfl.unwrap_or(DEFAULT_CFL)),
        }
    }
}

fn build_model(m: &ModelConfig, d: usize) -> Result<Arc<dyn StoredEnergy>> {
    Ok(match m {
        ModelConfig::Quadratic { c } => Arc::new(quadratic_model(c.resolve(), d)?),
        ModelConfig::Saturating { a, b, s } => Arc::new(saturating_model(*a, b.resolve(), *s, d)?),
        ModelConfig::Anisotropic { weights } => Arc::new(anisotropic_model(weights.clone())?),
    })
}
