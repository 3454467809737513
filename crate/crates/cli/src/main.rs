use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use recutil_cli::report::{suite_csv, SuiteRow};
use recutil_cli::{load_config, run_scenario, RunReport, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "recutil", version, about = "Recursive utility maximization with an unobserved drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report.
    Run {
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate { config: PathBuf },
    /// Run every `*.toml` scenario in a directory.
    Suite {
        dir: PathBuf,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(true)` when every enabled check passed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: valid scenario `{}`", config.display(), cfg.name);
            if !cfg.defaulted.is_empty() {
                println!("defaults: {}", cfg.defaulted.join(", "));
            }
            Ok(true)
        }
        Command::Run {
            config,
            out,
            seed,
            paths,
            steps,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            if let Some(n) = paths {
                cfg = cfg.with_paths(n)?;
            }
            if let Some(n) = steps {
                cfg = cfg.with_steps(n)?;
            }
            prepare(&out)?;
            let report = run_scenario(&cfg)?;
            print!("{}", report.to_text());
            emit(&report, &out)?;
            Ok(report.passed())
        }
        Command::Suite { dir, out } => {
            prepare(&out)?;
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
                .with_context(|| format!("cannot list {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "toml"))
                .collect();
            entries.sort();
            if entries.is_empty() {
                bail!("no scenario files in {}", dir.display());
            }
            let mut rows = Vec::new();
            for path in &entries {
                let label = path.file_name().unwrap_or_default().to_string_lossy().to_string();
                let outcome = load_config(path)
                    .map_err(anyhow::Error::from)
                    .and_then(|cfg| run_scenario(&cfg).map_err(anyhow::Error::from));
                let row = match outcome {
                    Ok(report) => {
                        print!("{}", report.to_text());
                        emit(&report, &out)?;
                        SuiteRow {
                            config: label,
                            scenario: report.scenario.name.clone(),
                            status: if report.passed() { "pass" } else { "fail" }.into(),
                            checks: report.checks.len(),
                            failures: report.failures(),
                            error: None,
                        }
                    }
                    Err(e) => {
                        eprintln!("{label}: {e:#}");
                        SuiteRow {
                            config: label,
                            scenario: String::new(),
                            status: "error".into(),
                            checks: 0,
                            failures: 0,
                            error: Some(format!("{e:#}")),
                        }
                    }
                };
                rows.push(row);
            }
            let table = suite_csv(&rows);
            std::fs::write(out.join("suite.csv"), &table).context("cannot write suite.csv")?;
            println!();
            for r in &rows {
                println!("{:<32} {:<6} {:>3} checks, {} failed", r.config, r.status, r.checks, r.failures);
            }
            Ok(rows.iter().all(|r| r.status == "pass"))
        }
    }
}

/// Fails early when the output directory cannot be created.
fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))
}

fn emit(report: &RunReport, out: &Path) -> Result<()> {
    let dir = report
        .write_to(out)
        .with_context(|| format!("cannot write report under {}", out.display()))?;
    println!("  report written to {}", dir.display());
    Ok(())
}
