//! Command-line behaviour: exit codes, config errors, run records and
//! partial results on failure.

use magtomo::cli::ExperimentConfig;
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn magtomo(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_magtomo")).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(args).output().unwrap()
}

const SMALL_TORUS: &str = "
[surface]
bolza_lambdas = []

[pestov]
samples = 10
";

#[test]
fn pestov_check_on_torus_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = magtomo(dir.path(), SMALL_TORUS, &["--seed", "9", "pestov-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/pestov_identity.json")).unwrap()).unwrap();
    assert!(rec["summary"]["max_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(rec["seed"], 9);
    assert_eq!(rec["criterion"], "C2");
    assert_eq!(rec["config"]["pestov"]["samples"], 10);
    assert!(rec["config"]["surface"]["torus_phi"].is_array(), "record embeds the resolved config");
    assert!(rec["report"]["leakage"].is_number());
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["C2"]["passed"], true);
    assert_eq!(summary["C3"]["passed"], true);
    let resolved = ExperimentConfig::load(&dir.path().join("out/config.toml")).unwrap();
    assert_eq!(resolved.seed, 9);
    assert!(dir.path().join("out/pestov.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["[surface]\ntorus_grid = -4\n", "[surface]\ntorus_grid = 7\n", "[pestov]\nsampels = 3\n", "seed = \"x\"\n"] {
        let out = magtomo(dir.path(), bad, &["pestov-check"]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert!(!out.stderr.is_empty(), "diagnostic for {bad}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_magtomo")).env("MAGTOMO_THREADS", "0").arg("print-config").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_magtomo")).arg("--config").arg(dir.path().join("missing.toml")).arg("riccati").output().unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn failed_check_keeps_partial_reports() {
    let dir = tempfile::tempdir().unwrap();
    // no band-limited function satisfies the identities to this tolerance
    let cfg = "[surface]\nbolza_lambdas = []\n\n[frame]\nsamples = 3\ntolerance = 1e-30\n";
    let out = magtomo(dir.path(), cfg, &["frame-check"]);
    assert_eq!(out.status.code(), Some(1));
    let rec: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/frame_identities.json")).unwrap()).unwrap();
    assert_eq!(rec["passed"], false);
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["C1"]["passed"], false);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn print_config_round_trips() {
    let out = Command::new(env!("CARGO_BIN_EXE_magtomo")).args(["--seed", "5", "print-config"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cfg = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig { seed: 5, ..Default::default() });
}

#[test]
fn same_seed_same_bytes_for_a_small_run() {
    let cfg = "[surface]\nbolza_grid = 32\nbolza_lambdas = [0.2]\n\n[transport]\ncases = 2\n";
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(magtomo(d.path(), cfg, &["transport-solve"]).status.code(), Some(0));
    }
    for name in ["transport_recovery.json", "transport.csv", "summary.json", "config.toml"] {
        assert_eq!(std::fs::read(a.path().join("out").join(name)).unwrap(), std::fs::read(b.path().join("out").join(name)).unwrap(), "{name}");
    }
}
