//! Orchestration of the batch runs behind the command-line tool.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_hash, ExperimentConfig};
use crate::cordes::{
    assemble_coefficients, check_cordes, check_dimension_condition, cordes_constants, CordesReport,
    DimensionCheck,
};
use crate::dynamics::{
    energy_balance, measure_apriori, simulate, EnergySample, Forcing, Harmonic, Lemma41Report,
    ProblemInstance, ProfileTerm, Trajectory, VectorProfile,
};
use crate::elliptic::{fixed_point_solve, verify_h2_estimate, FixedPointResult, H2EstimateReport};
use crate::error::{Error, Result};
use crate::grid::{estimate_khat, jacobian, trapezoid, Field, Grid};
use crate::stability::{
    pair_cordes, stability_constants, verify_pair, verify_u2_bound, PairReport, StabilityConstants, U2Check,
};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const CONSTANTS_FILE: &str = "constants.csv";
pub const TIMESERIES_FILE: &str = "timeseries.csv";

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Plain-text record of one run, written before and after the reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub trials: usize,
    pub started: u64,
    pub finished: Option<u64>,
    pub status: String,
    pub artifacts: Vec<(String, PathBuf)>,
    pub pass: Option<bool>,
}

impl RunManifest {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(RunManifest {
            config_hash: config_hash(cfg)?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.perturbation.seed,
            trials: cfg.perturbation.trials,
            started: unix_now(),
            finished: None,
            status: "running".into(),
            artifacts: Vec::new(),
            pass: None,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "config_hash = {}", self.config_hash)?;
        writeln!(w, "version = {}", self.version)?;
        writeln!(w, "seed = {}", self.seed)?;
        writeln!(w, "trials = {}", self.trials)?;
        writeln!(w, "started = {}", self.started)?;
        if let Some(f) = self.finished {
            writeln!(w, "finished = {f}")?;
        }
        writeln!(w, "status = {}", self.status)?;
        for (name, p) in &self.artifacts {
            writeln!(w, "artifact.{name} = {}", p.display())?;
        }
        if let Some(p) = self.pass {
            writeln!(w, "pass = {p}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dimension and Cordes conditions for the base material at `J u₀`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub dimension: DimensionCheck,
    pub cordes: CordesReport,
    pub epsilon_max: f64,
    pub pass: bool,
}

impl HypothesisReport {
    /// `Err` with a hypothesis-failure error when either condition fails.
    pub fn require(&self) -> Result<()> {
        if !self.dimension.ok {
            return Err(Error::DimensionCondition(format!(
                "kappa = {} not in ({}, {})",
                self.dimension.kappa, self.dimension.lower, self.dimension.upper
            )));
        }
        if !self.cordes.pass {
            return Err(Error::CordesFailed(format!(
                "inf epsilon = {:e}, min eigenvalue = {:e}",
                self.cordes.epsilon_inf, self.cordes.min_eigenvalue
            )));
        }
        Ok(())
    }
}

pub fn check_hypotheses(cfg: &ExperimentConfig) -> Result<HypothesisReport> {
    let problem = cfg.problem()?;
    let material = problem.material();
    let dimension = check_dimension_condition(material, problem.grid().nd());
    let cordes = check_cordes(&assemble_coefficients(material, &jacobian(problem.u0())?)?)?;
    let epsilon_max = cordes.epsilon.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(HypothesisReport {
        pass: dimension.ok && cordes.pass,
        dimension,
        cordes,
        epsilon_max,
    })
}

/// `(j₁, …, j_d)` of the first `count` sine modes, by increasing frequency.
fn sine_modes(d: usize, count: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return (1..=count).map(|j| vec![j]).collect();
    }
    let top = count + 1;
    let mut all: Vec<Vec<usize>> = (1..=top)
        .flat_map(|a| (1..=top).map(move |b| vec![a, b]))
        .collect();
    all.sort_by_key(|v| (v[0] * v[0] + v[1] * v[1], v[0]));
    all.truncate(count);
    all
}

fn random_profile(rng: &mut ChaCha8Rng, grid: &Grid, modes: usize) -> VectorProfile {
    let terms = (0..grid.components())
        .flat_map(|k| {
            sine_modes(grid.dim(), modes)
                .into_iter()
                .map(|m| ProfileTerm::sine(k, rng.random_range(-1.0..1.0), m))
                .collect::<Vec<_>>()
        })
        .collect();
    VectorProfile::new(terms)
}

fn scale_to(field: Field, norm: f64, target: f64) -> Field {
    if norm > 0.0 {
        field.scaled(target / norm)
    } else {
        field.scaled(0.0)
    }
}

/// `∫₀^T |g| + |ġ|` by the trapezoid rule on 4000 intervals.
fn harmonic_w11(h: &Harmonic, t_final: f64) -> f64 {
    let n = 4000;
    let dt = t_final / n as f64;
    let vals: Vec<f64> = (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            h.value(t).abs() + h.derivative(t, 1).abs()
        })
        .collect();
    trapezoid(&vals, dt)
}

/// Perturbed copy of `base` for trial `trial`; the stream depends only on `(seed, trial)`.
pub fn perturb(cfg: &ExperimentConfig, base: &ProblemInstance, trial: usize) -> Result<ProblemInstance> {
    let q = &cfg.perturbation;
    let mut rng = ChaCha8Rng::seed_from_u64(q.seed);
    rng.set_stream(trial as u64);
    let grid = base.grid();

    let p0 = random_profile(&mut rng, grid, q.modes).sample(grid)?;
    let t0 = q.u0 * rng.random::<f64>();
    let du0 = scale_to(p0.clone(), p0.h2(), t0);

    let p1 = random_profile(&mut rng, grid, q.modes).sample(grid)?;
    let t1 = q.u1 * rng.random::<f64>();
    let du1 = scale_to(p1.clone(), p1.h1(), t1);

    let pf = random_profile(&mut rng, grid, q.modes);
    let temporal = Harmonic::new(PI * rng.random_range(0..3) as f64 / base.final_time(), rng.random_range(0.0..2.0 * PI));
    let tf = q.f * rng.random::<f64>();
    let spatial = pf.sample(grid)?.l2() * harmonic_w11(&temporal, base.final_time());
    let factor = if spatial > 0.0 { tf / spatial } else { 0.0 };
    let df = VectorProfile::new(
        pf.terms()
            .iter()
            .map(|t| match t {
                ProfileTerm::Sine { component, amplitude, modes } => {
                    ProfileTerm::sine(*component, amplitude * factor, modes.clone())
                }
                other => other.clone(),
            })
            .collect(),
    );

    let ta = q.alpha * rng.random::<f64>();
    let mut alpha: Vec<f64> = base
        .material()
        .alpha()
        .iter()
        .map(|a| (a + ta * rng.random_range(-1.0..1.0)).max(0.0))
        .collect();
    if !alpha.iter().any(|a| *a > 0.0) {
        alpha = base.material().alpha().to_vec();
    }

    let material = base.material().with_alpha(alpha)?;
    let u0 = base.u0().add(&du0)?;
    let u1 = base.u1().add(&du1)?;
    let forcing = base.forcing().clone().plus(Forcing::separable(df, temporal));
    base.with_data(material, u0, u1, forcing)
}

/// Outcome of one perturbation trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub pair: PairReport,
    pub u2: U2Check,
    pub pass: bool,
}

/// Runs every trial against the simulated base trajectory; results are in trial order.
pub fn run_trials(cfg: &ExperimentConfig, base: &Trajectory, khat: f64) -> Result<Vec<TrialResult>> {
    let slack = cfg.output.slack;
    (0..cfg.perturbation.trials)
        .into_par_iter()
        .map(|trial| {
            let problem = perturb(cfg, base.problem(), trial)?;
            let perturbed = stage("simulate", simulate(&problem))?;
            let pair = verify_pair(base, &perturbed, khat)?;
            let u2 = verify_u2_bound(base.problem(), &problem)?;
            let ok = |m: f64| m >= -slack;
            let pass = ok(pair.v_bound.min_margin)
                && ok(pair.z_bound.min_margin)
                && ok(pair.h2_bound.min_margin)
                && ok(pair.main.min_margin)
                && ok(u2.margin);
            Ok(TrialResult { trial, pair, u2, pass })
        })
        .collect()
}

const REPORT_HEADER: [&str; 18] = [
    "trial", "du0_h2", "du1_h1", "df_w11", "dalpha", "main_rhs", "v_margin", "z_margin", "h2_margin", "main_margin",
    "u2_margin", "v_pass", "z_pass", "h2_pass", "main_pass", "u2_pass", "h1_small", "pass",
];

pub fn write_report(path: &Path, results: &[TrialResult], slack: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    let ok = |m: f64| (m >= -slack).to_string();
    for r in results {
        let p = &r.pair;
        let n = &p.norms;
        let margins = [
            p.v_bound.min_margin,
            p.z_bound.min_margin,
            p.h2_bound.min_margin,
            p.main.min_margin,
            r.u2.margin,
        ];
        let mut row = vec![r.trial.to_string(), fmt(n.du0_h2), fmt(n.du1_h1), fmt(n.df_w11), fmt(n.d_alpha_max)];
        row.push(fmt(p.main.rhs.first().copied().unwrap_or(0.0)));
        row.extend(margins.iter().map(|m| fmt(*m)));
        row.extend(margins.iter().map(|m| ok(*m)));
        row.push(p.h1_small.to_string());
        row.push(r.pass.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_constants(path: &Path, rows: &[(usize, &StabilityConstants)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::InvalidParameter("no constants to write".into()));
    };
    let mut header = vec!["trial".to_string()];
    header.extend(first.rows().iter().map(|(k, _)| k.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for (trial, c) in rows {
        let mut row = vec![trial.to_string()];
        row.extend(c.rows().iter().map(|(_, v)| fmt(*v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

/// Full pipeline: hypotheses, base run, perturbed runs, verifiers, reports.
///
/// The manifest is written first with `status = running` and rewritten on
/// completion; reports go to `cfg.output.directory`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = RunManifest::new(cfg)?;
    manifest.write(&manifest_path)?;

    let hyp = stage("check-cordes", check_hypotheses(cfg))?;
    stage("check-cordes", hyp.require())?;
    let base_problem = stage("setup", cfg.problem())?;
    let base = stage("simulate", simulate(&base_problem))?;
    let khat = stage("constants", estimate_khat(base.grid(), base.grid().components()))?;
    let results = stage("verify", run_trials(cfg, &base, khat))?;

    let report = dir.join(&cfg.output.report);
    write_report(&report, &results, cfg.output.slack)?;
    let constants = dir.join(CONSTANTS_FILE);
    let rows: Vec<(usize, &StabilityConstants)> = results.iter().map(|r| (r.trial, &r.pair.constants)).collect();
    write_constants(&constants, &rows)?;

    manifest.artifacts = vec![("report".into(), report), ("constants".into(), constants)];
    manifest.pass = Some(results.iter().all(|r| r.pass));
    manifest.finished = Some(unix_now());
    manifest.status = "complete".into();
    manifest.write(&manifest_path)?;
    Ok(manifest)
}

/// Result of `simulate`: the energy series and its summary.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub samples: Vec<EnergySample>,
    pub lemma41: Lemma41Report,
    pub files: Vec<PathBuf>,
}

/// Simulates the base problem and writes the energy series (and optionally every snapshot).
pub fn run_simulation(cfg: &ExperimentConfig, out: &Path) -> Result<SimulationOutcome> {
    let problem = stage("setup", cfg.problem())?;
    let tr = stage("simulate", simulate(&problem))?;
    let (samples, lemma41) = stage("energy", energy_balance(&tr))?;
    fs::create_dir_all(out)?;
    let series = out.join(TIMESERIES_FILE);
    let mut w = csv::Writer::from_path(&series).map_err(csv_err)?;
    w.write_record(["t", "E", "lemma41_lhs", "lemma41_rhs", "margin"]).map_err(csv_err)?;
    for s in &samples {
        w.write_record([fmt(s.t), fmt(s.energy), fmt(s.lemma41_lhs), fmt(s.lemma41_rhs), fmt(s.margin)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    let mut files = vec![series];
    if cfg.output.dump_fields {
        let fields = out.join("fields");
        fs::create_dir_all(&fields)?;
        for (m, snap) in tr.snapshots().iter().enumerate() {
            let path = fields.join(format!("u_{m:05}.csv"));
            snap.write_csv(BufWriter::new(File::create(&path)?))?;
            files.push(path);
        }
    }
    Ok(SimulationOutcome { samples, lemma41, files })
}

/// Result of `solve-elliptic`.
#[derive(Debug, Clone)]
pub struct EllipticOutcome {
    pub result: FixedPointResult,
    pub estimate: H2EstimateReport,
    pub c_alpha: f64,
    pub epsilon: f64,
}

/// Solves `L u = f` with coefficients frozen at `J u₀`.
///
/// The right side defaults to `sin(π x)` (product over axes) on every component.
pub fn run_elliptic(cfg: &ExperimentConfig, out: &Path) -> Result<EllipticOutcome> {
    let problem = stage("setup", cfg.problem())?;
    let grid = *problem.grid();
    let material = problem.material();
    let coeffs = assemble_coefficients(material, &jacobian(problem.u0())?)?;
    let report = check_cordes(&coeffs)?;
    let khat = estimate_khat(&grid, grid.components())?;
    let constants = stage("check-cordes", cordes_constants(&report, khat, material))?;
    let rhs_profile = cfg.elliptic.rhs.clone().unwrap_or_else(|| {
        VectorProfile::new(
            (0..grid.components())
                .map(|k| ProfileTerm::sine(k, 1.0, vec![1; grid.dim()]))
                .collect(),
        )
    });
    let f = rhs_profile.sample(&grid)?;
    let result = stage(
        "solve-elliptic",
        fixed_point_solve(&coeffs, &f, &report, cfg.elliptic.tolerance),
    )?;
    let estimate = verify_h2_estimate(&result, &f, constants.c_alpha, cfg.output.slack);
    fs::create_dir_all(out)?;
    result
        .solution
        .write_csv(BufWriter::new(File::create(out.join("solution.csv"))?))?;
    Ok(EllipticOutcome {
        result,
        estimate,
        c_alpha: constants.c_alpha,
        epsilon: report.epsilon_used,
    })
}

/// Stability constants of the base problem, with `M₀ … M₃` measured on its trajectory.
pub fn reference_constants(cfg: &ExperimentConfig) -> Result<StabilityConstants> {
    stage("check-cordes", check_hypotheses(cfg)?.require())?;
    let problem = stage("setup", cfg.problem())?;
    let tr = stage("simulate", simulate(&problem))?;
    let khat = stage("constants", estimate_khat(tr.grid(), tr.grid().components()))?;
    let cordes = stage("check-cordes", pair_cordes(&tr, &tr, khat))?;
    let apriori = measure_apriori(&tr, &tr)?;
    stage(
        "constants",
        stability_constants(
            tr.material(),
            &apriori,
            tr.grid(),
            problem.final_time(),
            &cordes.constants,
            problem.u0().h2(),
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn config(dir: &Path, extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"{{
  "grid": {{ "d": 1, "n": 2, "resolution": 16 }},
  "material": {{
    "models": [
      {{ "kind": "saturating", "a": 0.5, "b": 0.2, "s": 1.0 }},
      {{ "kind": "quadratic", "c": 0.5 }}
    ],
    "alpha": [1.0, 0.6]
  }},
  "problem": {{
    "u0": [ {{ "profile": "sine", "component": 0, "amplitude": 0.05, "modes": [1] }} ],
    "t_final": 0.25
  }},
  "output": {{ "directory": {:?} }}{extra}
}}"#,
            dir.display().to_string()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn zero_perturbation_gives_zero_lhs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(tmp.path(), "");
        let m = run_experiment(&cfg).unwrap();
        assert_eq!(m.pass, Some(true));
        let base = simulate(&cfg.problem().unwrap()).unwrap();
        let khat = estimate_khat(base.grid(), 2).unwrap();
        let r = run_trials(&cfg, &base, khat).unwrap();
        assert!(r[0].pair.main.lhs.iter().all(|v| *v == 0.0));
        let manifest = fs::read_to_string(tmp.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("status = complete"));
    }

    #[test]
    fn perturbations_respect_magnitudes() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(
            tmp.path(),
            r#", "perturbation": { "u0": 0.01, "u1": 0.01, "f": 0.01, "alpha": 0.01, "trials": 4, "seed": 3 }"#,
        );
        let base = cfg.problem().unwrap();
        for trial in 0..4 {
            let p = perturb(&cfg, &base, trial).unwrap();
            assert!(p.u0().sub(base.u0()).unwrap().h2() <= 0.01 * (1.0 + 1e-12));
            assert!(p.u1().sub(base.u1()).unwrap().h1() <= 0.01 * (1.0 + 1e-12));
            let da = p
                .material()
                .alpha()
                .iter()
                .zip(base.material().alpha())
                .fold(0.0f64, |s, (a, b)| s.max((a - b).abs()));
            assert!(da <= 0.01);
        }
        let a = perturb(&cfg, &base, 1).unwrap();
        let b = perturb(&cfg, &base, 1).unwrap();
        assert_eq!(a.u0(), b.u0());
        assert_ne!(a.u0(), perturb(&cfg, &base, 2).unwrap().u0());
    }

    #[test]
    fn anisotropic_material_fails_the_gate() {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!(
            r#"{{
  "grid": {{ "d": 2, "n": 2, "resolution": 7 }},
  "material": {{ "models": [ {{ "kind": "anisotropic", "weights": [1.0, 1.0, 1.0, 10.0] }} ], "alpha": [1.0] }},
  "problem": {{ "t_final": 0.1 }},
  "output": {{ "directory": {:?} }}
}}"#,
            tmp.path().display().to_string()
        );
        let cfg = parse_config(&text).unwrap();
        let err = run_experiment(&cfg).unwrap_err();
        assert!(err.is_hypothesis_failure());
        assert!(matches!(err, Error::Stage { stage: "check-cordes", .. }));
        let manifest = fs::read_to_string(tmp.path().join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("status = running"));
    }

    #[test]
    fn sine_modes_are_ordered_by_frequency() {
        assert_eq!(sine_modes(1, 3), vec![vec![1], vec![2], vec![3]]);
        let m = sine_modes(2, 5);
        assert_eq!(m[0], vec![1, 1]);
        assert_eq!(m.len(), 5);
        assert!(m.windows(2).all(|w| w[0][0].pow(2) + w[0][1].pow(2) <= w[1][0].pow(2) + w[1][1].pow(2)));
    }
}
