use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn hyperstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperstab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_cordes_passes_on_minimal() {
    let cfg = config("minimal.json");
    let o = hyperstab(&["check-cordes", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("pass=true"));
}

#[test]
fn anisotropic_exits_with_hypothesis_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("anisotropic.json");
    let o = hyperstab(&["check-cordes", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("dimension_ok=false"));

    let out = dir.path().to_str().unwrap();
    let o = hyperstab(&["verify-stability", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("check-cordes"));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(hyperstab(&["simulate"]).status.code(), Some(64));
    assert_eq!(hyperstab(&["frobnicate"]).status.code(), Some(64));
    let cfg = config("minimal.json");
    let o = hyperstab(&["verify-stability", "--config", cfg.to_str().unwrap(), "--trials", "lots"]);
    assert_eq!(o.status.code(), Some(64));
    assert_eq!(hyperstab(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_is_a_plain_error() {
    let o = hyperstab(&["check-cordes", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn constants_prints_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("minimal.json");
    let out = dir.path().to_str().unwrap();
    let o = hyperstab(&["constants", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["cbar", "chat", "c0", "c5", "cbar2", "khat", "epsilon"] {
        assert!(text.lines().any(|l| l.split_whitespace().next() == Some(name)), "{name} missing");
    }
    assert!(dir.path().join("constants.csv").exists());
}

#[test]
fn simulate_writes_only_timeseries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("minimal.json");
    let out = dir.path().to_str().unwrap();
    let o = hyperstab(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, ["timeseries.csv"]);
}

#[test]
fn verify_stability_report_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("minimal.json");
    let report = dir.path().join("trials.csv");
    let o = hyperstab(&[
        "verify-stability",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("seed=9"));
    assert_eq!(std::fs::read_to_string(&report).unwrap().lines().count(), 3);
    assert!(dir.path().join("manifest.txt").exists());
}
