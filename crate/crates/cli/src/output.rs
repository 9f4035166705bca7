//! Deterministic file output: number formatting, header blocks, hashing.
//!
//! Re-running any case study with the same seed must produce bitwise
//! identical files, so everything here is free of timestamps, map
//! iteration order and locale effects.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a float with 12 significant digits (scientific notation).
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        // Avoid the "-0" spelling so equal values format identically.
        return format!("{:.11e}", 0.0f64);
    }
    format!("{x:.11e}")
}

/// Formats an optional value; `None` and NaN become an empty cell.
pub fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => fmt_sig(v),
        _ => String::new(),
    }
}

/// Short hash of the canonical (compact, meta-stripped) config encoding.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance header carried by every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct MetaBlock {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl MetaBlock {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        MetaBlock {
            version: TOOL_VERSION.to_string(),
            seed,
            config_hash: config_hash.into(),
        }
    }

    /// Comment-style header lines for CSV files.
    pub fn csv_header(&self) -> String {
        format!(
            "# fixpoint {}\n# seed={}\n# config_hash={}\n",
            self.version, self.seed, self.config_hash
        )
    }
}

/// Writes a CSV body under the meta header.
pub fn write_csv(path: &Path, meta: &MetaBlock, body: &str) -> Result<()> {
    fs::write(path, format!("{}{}", meta.csv_header(), body))?;
    Ok(())
}

/// Writes a JSON object `{version, seed, config_hash, <payload fields>}`.
pub fn write_json<T: Serialize>(path: &Path, meta: &MetaBlock, payload: &T) -> Result<()> {
    let mut object = serde_json::Map::new();
    object.insert("version".into(), meta.version.clone().into());
    object.insert("seed".into(), meta.seed.into());
    object.insert("config_hash".into(), meta.config_hash.clone().into());
    let value = serde_json::to_value(payload)?;
    match value {
        serde_json::Value::Object(fields) => {
            for (k, v) in fields {
                object.insert(k, v);
            }
        }
        other => {
            return Err(CliError::Internal(format!(
                "json payload must be an object, got {other}"
            )));
        }
    }
    let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(object))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
