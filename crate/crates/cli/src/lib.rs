//! Command-line front end of the fixpoint laboratory: named case
//! studies, generic experiment configs, and parameter sweeps with
//! deterministic CSV/JSON outputs.

pub mod casestudy;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use casestudy::{run_case_study, CaseOutcome, Check, CASE_NAMES};
pub use config::ExperimentConfig;
pub use error::{exit_code, CliError};
pub use experiment::{execute, run_config, sweep, Execution, SweepRow};
