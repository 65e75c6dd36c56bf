use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hyperstab::config::{load_config, ExperimentConfig};
use hyperstab::experiment::{
    check_hypotheses, reference_constants, run_elliptic, run_experiment, run_simulation, write_constants,
    CONSTANTS_FILE,
};

const EXIT_PASS: u8 = 0;
const EXIT_HYPOTHESIS: u8 = 2;
const EXIT_VERIFIER: u8 = 3;
const EXIT_USAGE: u8 = 64;

/// Hyperelastodynamics stability experiments.
#[derive(Debug, Parser)]
#[command(name = "hyperstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (or report file for verify-stability).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the perturbation seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dimension and Cordes conditions at the initial state.
    CheckCordes(Shared),
    /// Fixed-point solve of the frozen-coefficient elliptic system.
    SolveElliptic(Shared),
    /// Simulate the base problem and write the energy time series.
    Simulate(Shared),
    /// Print every stability constant for the base problem.
    Constants(Shared),
    /// Perturbation trials against the stability estimates.
    VerifyStability {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(shared: &Shared) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&shared.config)
        .with_context(|| format!("loading {}", shared.config.display()))?;
    if let Some(seed) = shared.seed {
        cfg.perturbation.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(shared: &Shared, cfg: &ExperimentConfig) -> PathBuf {
    shared.out.clone().unwrap_or_else(|| cfg.output.directory.clone())
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key}={value}");
}

fn check_cordes(shared: &Shared) -> Result<u8> {
    let cfg = load(shared)?;
    let r = check_hypotheses(&cfg)?;
    kv("dimension_ok", r.dimension.ok);
    kv("kappa", r.dimension.kappa);
    kv("mu", r.dimension.mu);
    kv("dimension_lower", r.dimension.lower);
    kv("dimension_upper", r.dimension.upper);
    kv("epsilon_inf", r.cordes.epsilon_inf);
    kv("epsilon_max", r.epsilon_max);
    kv("epsilon_used", r.cordes.epsilon_used);
    kv("alpha_min", r.cordes.alpha_min);
    kv("alpha_max", r.cordes.alpha_max);
    kv("min_eigenvalue", r.cordes.min_eigenvalue);
    kv("pass", r.pass);
    Ok(if r.pass { EXIT_PASS } else { EXIT_HYPOTHESIS })
}

fn solve_elliptic(shared: &Shared) -> Result<u8> {
    let cfg = load(shared)?;
    let out = out_dir(shared, &cfg);
    let r = run_elliptic(&cfg, &out)?;
    let lines = [
        ("iterations", r.result.iterations.to_string()),
        ("max_contraction", r.result.max_contraction().to_string()),
        ("contraction_bound", r.result.contraction_bound.to_string()),
        ("residual", r.result.residual.to_string()),
        ("epsilon", r.epsilon.to_string()),
        ("c_alpha", r.c_alpha.to_string()),
        ("h2_norm", r.estimate.lhs.to_string()),
        ("h2_bound", r.estimate.rhs.to_string()),
        ("h2_margin", r.estimate.margin.to_string()),
        ("pass", r.estimate.pass.to_string()),
    ];
    let text: String = lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    std::fs::write(out.join("elliptic.txt"), &text)?;
    print!("{text}");
    if shared.verbose {
        eprintln!("contraction ratios: {:?}", r.result.contraction_estimates);
    }
    Ok(if r.estimate.pass { EXIT_PASS } else { EXIT_VERIFIER })
}

fn simulate(shared: &Shared) -> Result<u8> {
    let cfg = load(shared)?;
    let out = out_dir(shared, &cfg);
    let r = run_simulation(&cfg, &out)?;
    kv("steps", r.lemma41.steps);
    kv("min_margin", r.lemma41.min_margin);
    kv("worst_time", r.lemma41.worst_time);
    kv("max_energy_drift", r.lemma41.max_energy_drift);
    kv("pass", r.lemma41.pass);
    if shared.verbose {
        for f in &r.files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(if r.lemma41.pass { EXIT_PASS } else { EXIT_VERIFIER })
}

fn constants(shared: &Shared) -> Result<u8> {
    let cfg = load(shared)?;
    let c = reference_constants(&cfg)?;
    for (name, value) in c.rows() {
        println!("{name:<16} {value:.12e}");
    }
    if let Some(out) = &shared.out {
        std::fs::create_dir_all(out)?;
        write_constants(&out.join(CONSTANTS_FILE), &[(0, &c)])?;
    }
    Ok(EXIT_PASS)
}

/// `--out x.csv` names the report file; any other value is the output directory.
fn apply_out(cfg: &mut ExperimentConfig, out: &Path) {
    if out.extension().is_some_and(|e| e == "csv") {
        if let Some(name) = out.file_name() {
            cfg.output.report = name.to_string_lossy().into_owned();
        }
        cfg.output.directory = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
    } else {
        cfg.output.directory = out.to_path_buf();
    }
}

fn verify_stability(shared: &Shared, trials: Option<usize>) -> Result<u8> {
    let mut cfg = load(shared)?;
    if let Some(t) = trials {
        anyhow::ensure!(t >= 1, "--trials must be at least 1");
        cfg.perturbation.trials = t;
    }
    if let Some(out) = &shared.out {
        apply_out(&mut cfg, out);
    }
    let m = run_experiment(&cfg)?;
    kv("config_hash", &m.config_hash);
    kv("trials", m.trials);
    kv("seed", m.seed);
    for (name, path) in &m.artifacts {
        kv(name, path.display());
    }
    let pass = m.pass.unwrap_or(false);
    kv("pass", pass);
    Ok(if pass { EXIT_PASS } else { EXIT_VERIFIER })
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::CheckCordes(s) => check_cordes(s),
        Command::SolveElliptic(s) => solve_elliptic(s),
        Command::Simulate(s) => simulate(s),
        Command::Constants(s) => constants(s),
        Command::VerifyStability { shared, trials } => verify_stability(shared, *trials),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let hypothesis = err
        .chain()
        .filter_map(|e| e.downcast_ref::<hyperstab::Error>())
        .any(|e| e.is_hypothesis_failure());
    if hypothesis {
        EXIT_HYPOTHESIS
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
