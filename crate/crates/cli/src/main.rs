//! `fixpoint` command-line interface.
//!
//! Verbs:
//! ```text
//!   case <name> [--param k=v]... --out DIR    run a named case study
//!   run CONFIG --out DIR                      execute a config file
//!   sweep CONFIG --param PATH --values v1,v2,... --out DIR
//! ```
//!
//! Exit status: 0 when all checks pass, 1 when a check fails, 2 on
//! configuration or runtime errors.  `FIXPOINT_SEED` overrides the
//! configured seed.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fixpoint_cli::error::{error_exit_code, exit_code, CliError};
use fixpoint_cli::{run_case_study, run_config, sweep, ExperimentConfig, CASE_NAMES};

#[derive(Parser)]
#[command(name = "fixpoint", version, about = "Fixed-point iteration laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named case study.
    Case {
        /// One of the built-in studies.
        name: String,
        /// Study parameter as key=value (numbers, booleans, strings).
        #[arg(long = "param")]
        params: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute an experiment config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's output.directory).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep a scalar config parameter over a list of values.
    Sweep {
        config: PathBuf,
        /// Dotted path of the scalar, e.g. problem.params.r
        #[arg(long)]
        param: String,
        /// Comma-separated list of values.
        #[arg(long)]
        values: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, serde_json::Value>, CliError> {
    let mut out = BTreeMap::new();
    for item in raw {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            CliError::Config(format!("parameter '{item}' is not of the form key=value"))
        })?;
        let parsed = if let Ok(n) = value.parse::<f64>() {
            // Keep integers integral so u64 parameters round-trip.
            if n.fract() == 0.0 && value.parse::<u64>().is_ok() {
                serde_json::json!(value.parse::<u64>().unwrap())
            } else {
                serde_json::json!(n)
            }
        } else if let Ok(b) = value.parse::<bool>() {
            serde_json::json!(b)
        } else {
            serde_json::json!(value)
        };
        out.insert(key.to_string(), parsed);
    }
    Ok(out)
}

fn parse_values(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("sweep value '{s}' is not a number")))
        })
        .collect()
}

fn run() -> Result<i32, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Case { name, params, out } => {
            if !CASE_NAMES.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown case study '{name}' (known: {})",
                    CASE_NAMES.join(", ")
                )));
            }
            let params = parse_params(&params)?;
            let outcome = run_case_study(&name, params, &out)?;
            for check in &outcome.checks {
                println!(
                    "[{}] {}: {}",
                    if check.pass { "pass" } else { "FAIL" },
                    check.name,
                    check.detail
                );
            }
            println!(
                "{}: {} ({} checks), outputs in {}",
                outcome.name,
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.checks.len(),
                outcome.out_dir.display()
            );
            Ok(exit_code(outcome.pass))
        }
        Command::Run { config, out } => {
            let (execution, dir) = run_config(&config, Some(&out))?;
            println!(
                "outcome: {}, iterations: {}, final residual: {}, outputs in {}",
                serde_json::to_value(execution.trace.outcome)?
                    .as_str()
                    .unwrap_or("?"),
                execution.trace.steps(),
                fixpoint_cli::output::fmt_sig(execution.trace.final_residual()),
                dir.display()
            );
            Ok(0)
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let config = ExperimentConfig::from_path(&config)?;
            let values = parse_values(&values)?;
            let rows = sweep(&config, &param, &values, &out)?;
            for row in &rows {
                println!(
                    "{} -> {} in {} iterations",
                    fixpoint_cli::output::fmt_sig(row.value),
                    serde_json::to_value(row.outcome)?.as_str().unwrap_or("?"),
                    row.iterations
                );
            }
            println!("sweep written to {}", out.join("sweep.csv").display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(error_exit_code(&err) as u8)
        }
    }
}
