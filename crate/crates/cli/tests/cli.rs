//! End-to-end runs of the `partlin` binary: exit codes, written files,
//! configuration merging and reproducibility of the CSV outputs.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn partlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partlin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest written");
    serde_json::from_str(&text).expect("manifest is JSON")
}

fn out_arg(dir: &TempDir) -> String {
    dir.path().to_string_lossy().into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&partlin(&["--help"])), 0);
    assert_eq!(code(&partlin(&["--version"])), 0);
}

#[test]
fn unknown_flag_is_a_configuration_error() {
    let o = partlin(&["verify", "--map", "LIN3", "--bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_map_lists_catalog() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["foliation", "--map", "NOPE", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("POLY3"), "{}", stderr(&o));
}

#[test]
fn missing_map_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&partlin(&["linearize", "--out", &out_arg(&dir)])), 1);
}

#[test]
fn inadmissible_rho_exits_one() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["foliation", "--map", "POLY3", "--rho", "2.5", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));
}

#[test]
fn invalid_numeric_flags_exit_one() {
    let dir = TempDir::new().unwrap();
    for args in [["--grid", "1"], ["--tol", "-1"], ["--horizon", "0"]] {
        let mut full = vec!["foliation", "--map", "LIN3", "--out"];
        let out = out_arg(&dir);
        full.push(&out);
        full.extend(args);
        assert_eq!(code(&partlin(&full)), 1, "{args:?}");
    }
}

#[test]
fn malformed_spec_file_exits_one() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("map.json");
    std::fs::write(&spec, "{ not json").unwrap();
    let o = partlin(&["linearize", "--spec", &spec.to_string_lossy(), "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn linearize_lin3_passes_with_identity_conjugacy() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["linearize", "--map", "LIN3", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let m = manifest(dir.path());
    assert_eq!(m["command"], "linearize");
    assert_eq!(m["passed"], true);
    assert!(m["linearization"].is_object());
    assert!(dir.path().join("conjugacy_residual.csv").is_file());
    assert!(stdout(&o).contains("PASS C1"), "{}", stdout(&o));
}

#[test]
fn foliation_writes_leaves_and_orbit_tables() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["foliation", "--map", "POLY3", "--grid", "4", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    for f in ["leaves.csv", "lp_orbit.csv", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let leaves = std::fs::read_to_string(dir.path().join("leaves.csv")).unwrap();
    // Header plus grid 4 -> 4^3 leaf samples in three dimensions.
    assert_eq!(leaves.lines().count(), 1 + 64);
}

#[test]
fn report_requires_a_verify_run() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["report", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("verify"), "{}", stderr(&o));
}

#[test]
fn verify_then_report_builds_bundles() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["verify", "--map", "LIN3", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report["records"].as_array().is_some_and(|r| !r.is_empty()));

    let o = partlin(&["report", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["plot_leaf_cross_section.csv", "plot_conjugacy_residual.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let plot = std::fs::read_to_string(dir.path().join("plot_conjugacy_residual.csv")).unwrap();
    let header = plot.lines().next().unwrap();
    assert!(!header.split(',').any(|c| c == "pass" || c == "threshold"), "{header}");
}

#[test]
fn demo_map_verifies_with_report_only_sharpness() {
    let dir = TempDir::new().unwrap();
    let o = partlin(&["verify", "--map", "CEX1", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("C11"), "{}", stdout(&o));
    let o = partlin(&["report", "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("plot_demo_remainders.csv").is_file());
}

#[test]
fn config_file_merges_under_explicit_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("from-file");
    std::fs::write(
        &cfg,
        serde_json::json!({ "map": "POLY3", "grid": 3, "seed": 7, "out": out }).to_string(),
    )
    .unwrap();
    let o = partlin(&["foliation", "--config", &cfg.to_string_lossy(), "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["map"], "POLY3");
    assert_eq!(m["config"]["grid"], 3);
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["settings"]["seed"], 9);
}

#[test]
fn config_file_with_unknown_field_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{ "map": "LIN3", "colour": "red" }"#).unwrap();
    let o = partlin(&["foliation", "--config", &cfg.to_string_lossy(), "--out", &out_arg(&dir)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn repeated_runs_write_identical_csvs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = partlin(&["foliation", "--map", "POLY3b", "--grid", "3", "--seed", "5", "--out", &out_arg(d)]);
        assert_eq!(code(&o), 0);
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?}");
    }
}
