//! CLI-level errors and the exit-status contract.
//!
//! Exit codes: 0 when all checks of a run pass, 1 when a check fails,
//! 2 for configuration or runtime errors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed configuration: unknown fields, bad values, missing keys.
    #[error("config error: {0}")]
    Config(String),

    /// A dotted sweep path did not resolve to a scalar.
    #[error("path resolution error: {0}")]
    PathResolution(String),

    #[error(transparent)]
    Core(#[from] fixpoint_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit status for a completed run with the given check outcome.
pub fn exit_code(all_checks_pass: bool) -> i32 {
    if all_checks_pass {
        0
    } else {
        1
    }
}

/// Exit status for an error.
pub fn error_exit_code(_err: &CliError) -> i32 {
    2
}
