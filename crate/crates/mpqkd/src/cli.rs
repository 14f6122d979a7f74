//! Argument parsing, output formatting and exit codes.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::commands::{self, sci, SWEEP_HEADER};
use crate::config::RunConfig;
use crate::error::CliError;

/// Finite-key key rates, swarm optimization and Monte Carlo validation for
/// asymmetric mode-pairing QKD.
#[derive(Debug, Parser)]
#[command(name = "mpqkd", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML or JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the swarm (optimize, sweep) or the oracle.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Override a config value, e.g. `--set protocol.pulses=1e12`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Key-rate breakdown of the configured parameter vector.
    Evaluate,
    /// Swarm search for the rate-maximizing parameter vector.
    Optimize,
    /// Rate versus total distance, one row per point.
    Sweep,
    /// Monte Carlo check of the analytic model; exits 1 if any |z| > 4.
    Oracle {
        /// Simulated rounds (overrides `oracle.rounds`).
        #[arg(long)]
        rounds: Option<u64>,
    },
}

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// JSON output: the effective configuration plus a `report` section. The
/// loader ignores `report`, so the document can be fed back as `--config`.
#[derive(Serialize)]
struct Document<'a, R: Serialize> {
    #[serde(flatten)]
    config: &'a RunConfig,
    report: R,
}

fn json<R: Serialize>(config: &RunConfig, report: R) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Document { config, report })
        .map_err(|e| CliError::config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(vec![]);
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn breakdown_csv(r: &commands::EvaluateReport) -> Result<String, CliError> {
    let b = &r.breakdown;
    let header = [
        "R",
        "key_length",
        "lambda_ec",
        "y11_z",
        "m11_z",
        "m11_x",
        "e11_x_bit",
        "e11_z_ph",
        "m_mumu",
        "e_mumu",
        "reason",
    ];
    let row = vec![
        sci(b.rate),
        sci(b.key_length),
        sci(b.lambda_ec),
        sci(b.y11_z),
        sci(b.m11_z),
        sci(b.m11_x),
        sci(b.e11_x_bit),
        sci(b.e11_z_ph),
        sci(b.m_mumu),
        sci(b.e_mumu),
        r.reason.clone().unwrap_or_default(),
    ];
    csv_text(&header, &[row])
}

/// Runs a parsed command line. Returns the rendered output and whether the
/// command's check passed.
pub fn execute(cli: &Cli) -> Result<(String, bool), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Evaluate => {
            let report = commands::evaluate(&cfg)?;
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json(&cfg, &report)?,
                Format::Csv => breakdown_csv(&report)?,
            };
            Ok((text, true))
        }
        Command::Optimize => {
            if let Some(seed) = cli.seed {
                cfg.pso.seed = seed;
            }
            let report = commands::optimize(&cfg)?;
            cfg.params = Some(report.params);
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json(&cfg, &report)?,
                Format::Csv => {
                    let ev = commands::EvaluateReport::from(report.breakdown);
                    let mut rec: Vec<String> =
                        report.params.free().iter().map(|v| sci(*v)).collect();
                    rec.push(report.iterations.to_string());
                    rec.push(report.termination.name().to_owned());
                    let header = [
                        "mu_a",
                        "nu_a",
                        "p_mu_a",
                        "p_nu_a",
                        "mu_b",
                        "nu_b",
                        "p_mu_b",
                        "p_nu_b",
                        "iterations",
                        "termination",
                    ];
                    let params = csv_text(&header, &[rec])?;
                    format!("{}{}", params, breakdown_csv(&ev)?)
                }
            };
            Ok((text, true))
        }
        Command::Sweep => {
            if let Some(seed) = cli.seed {
                cfg.pso.seed = seed;
            }
            let rows = commands::sweep(&cfg)?;
            let text = match cli.format.unwrap_or(Format::Csv) {
                Format::Json => json(&cfg, &rows)?,
                Format::Csv => {
                    let recs: Vec<Vec<String>> = rows.iter().map(|r| r.csv_record()).collect();
                    csv_text(&SWEEP_HEADER, &recs)?
                }
            };
            Ok((text, true))
        }
        Command::Oracle { rounds } => {
            if let Some(seed) = cli.seed {
                cfg.oracle.seed = seed;
            }
            if let Some(n) = rounds {
                cfg.oracle.rounds = n;
            }
            let report = commands::oracle(&cfg)?;
            let passed = report.passed;
            let text = match cli.format.unwrap_or(Format::Json) {
                Format::Json => json(&cfg, &report)?,
                Format::Csv => {
                    let recs: Vec<Vec<String>> = report
                        .checks
                        .iter()
                        .map(|c| vec![c.label.clone(), sci(c.empirical), sci(c.expected), sci(c.z)])
                        .collect();
                    csv_text(&["entry", "empirical", "expected", "z"], &recs)?
                }
            };
            Ok((text, passed))
        }
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Entry point of the `mpqkd` binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|(text, ok)| emit(&cli, &text).map(|()| ok)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!(
                "mpqkd: check failed: at least one |z| exceeds {}",
                commands::Z_LIMIT
            );
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("mpqkd: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
