//! `partlin`: foliations, linearization and verification reports for the
//! catalog maps or a map specification file.
//!
//! Exit codes: 0 when every gating check passes, 1 for configuration
//! errors, 2 for numerical failures or failed checks.

mod bundle;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use partlin::linearize::LinearizationManifest;
use partlin::pipeline::PipelineManifest;
use partlin::verify::{run_scope, CheckRecord, Fingerprint, Scope, SuiteOutput, VerifyConfig};

use config::{ConfigError, RunConfig};

#[derive(Parser)]
#[command(name = "partlin", version, about = "Invariant foliations and differentiable linearization near partially hyperbolic fixed points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Unstable foliation: solved sequences, chart identities, leaf samples
    /// and the backward-orbit oracle.
    Foliation(RunConfig),
    /// Normalization and conjugacy to the normal form, with residuals.
    Linearize(RunConfig),
    /// Every verification check; writes report.json and all tables.
    Verify(RunConfig),
    /// Plot-ready CSV bundles from the output of a verify run.
    Report(RunConfig),
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    settings: Option<&'a VerifyConfig>,
    fingerprint: Option<Fingerprint>,
    passed: bool,
    runtime_s: f64,
    error: Option<String>,
    pipeline: Option<&'a PipelineManifest>,
    linearization: Option<&'a LinearizationManifest>,
    records: &'a [CheckRecord],
    outputs: Vec<String>,
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect()
}

fn print_record(r: &CheckRecord) {
    let status = match (r.gating, r.passed) {
        (false, _) => "INFO",
        (true, true) => "PASS",
        (true, false) => "FAIL",
    };
    let measured = match (r.measured, r.threshold, r.exponent) {
        (Some(m), Some(t), _) => format!("measured {m:.3e} (threshold {t:.1e})"),
        (_, Some(t), Some(e)) => format!("exponent {e:.4} (threshold {t})"),
        _ => String::new(),
    };
    println!("{status} {:<4} {:<28} {measured} [{:.2} s]", r.criterion, r.name, r.runtime_s);
}

fn execute(command: &str, scope: Scope, rc: RunConfig) -> anyhow::Result<bool> {
    let rc = rc.resolve()?;
    let model = rc.model()?;
    let cfg = rc.verify_config(&model)?;
    let out = rc.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| ConfigError(format!("cannot create {}: {e}", out.display())))?;
    let t0 = Instant::now();
    let name = model.name.clone();
    let result = run_scope(model, &cfg, scope);
    let runtime_s = t0.elapsed().as_secs_f64();
    let run: SuiteOutput = match result {
        Ok(r) => r,
        Err(e) => {
            let manifest = Manifest {
                command,
                version: env!("CARGO_PKG_VERSION"),
                config: &rc,
                settings: Some(&cfg),
                fingerprint: Some(cfg.fingerprint()),
                passed: false,
                runtime_s,
                error: Some(e.to_string()),
                pipeline: None,
                linearization: None,
                records: &[],
                outputs: Vec::new(),
            };
            write(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
            return Err(e).with_context(|| format!("{command} on {name}"));
        }
    };
    let mut outputs = Vec::new();
    for t in &run.tables {
        let path = out.join(format!("{}.csv", t.name));
        write(&path, &t.to_csv())?;
        outputs.push(path);
    }
    if scope == Scope::Full {
        let path = out.join("report.json");
        write(&path, &serde_json::to_string_pretty(&run.report)?)?;
        outputs.push(path);
    }
    let passed = run.report.passed();
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: &rc,
        settings: Some(&cfg),
        fingerprint: Some(run.report.fingerprint.clone()),
        passed,
        runtime_s,
        error: None,
        pipeline: run.pipeline.as_ref(),
        linearization: run.linearization.as_ref(),
        records: &run.report.records,
        outputs: file_names(&outputs),
    };
    write(&out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;

    for r in &run.report.records {
        print_record(r);
    }
    println!(
        "{command} {name}: {} in {runtime_s:.1} s; outputs in {}",
        if passed { "all gating checks passed" } else { "some gating checks failed" },
        out.display()
    );
    Ok(passed)
}

fn report(rc: RunConfig) -> anyhow::Result<bool> {
    let rc = rc.resolve()?;
    let dir = rc.out_dir();
    let written = bundle::write_bundles(&dir)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(true)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Foliation(rc) => execute("foliation", Scope::Foliation, rc),
        Command::Linearize(rc) => execute("linearize", Scope::Linearize, rc),
        Command::Verify(rc) => execute("verify", Scope::Full, rc),
        Command::Report(rc) => report(rc),
    }
}

/// 1 for configuration and input errors, 2 for everything numerical.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<partlin::Error>() {
            return match err {
                partlin::Error::InvalidInput(_) | partlin::Error::Inadmissible { .. } => 1,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
