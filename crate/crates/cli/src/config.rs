//! Experiment configuration: a strict JSON tree describing a problem, a
//! run, optional analyses and the output sinks.
//!
//! Unknown fields are rejected at the top level so misspelled keys fail
//! loudly; semantic validation (weights, radii, dimensions) happens in
//! [`ExperimentConfig::validate`].  The `problem` block is either an
//! explicit operator tree or a named case study with parameters, which
//! keeps parameter sweeps over case-level scalars (circle radius, step
//! length, relaxation) coherent across every place they appear.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use fixpoint_core::driver::StopRule;
use fixpoint_core::geometry::Affine;
use fixpoint_core::geometry::{FunctionSpec, SetSpec};
use fixpoint_core::operators::{OperatorSpec, SelectionPolicy};
use fixpoint_core::point::Point;
use fixpoint_core::productspace::{DifferenceVector, ProductPoint};
use fixpoint_core::regularity::{SampleRegion, ZeroSet};

use crate::error::{CliError, Result};
use crate::output::MetaBlock;

/// Root configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaBlock>,
    pub problem: ProblemSpec,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
    pub output: OutputSpec,
}

/// Problem description: a named case with parameters, or an explicit
/// operator tree (optionally with the sets/functions it was built from,
/// kept for reference in the emitted file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<SetSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functions: Option<Vec<FunctionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<OperatorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub x0: Point,
    #[serde(default)]
    pub stop: StopRule,
    #[serde(default)]
    pub policy: SelectionPolicy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    /// Reference zero set for distances and q-factors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ZeroSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annuli: Option<AnnuliSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub estimators: Vec<EstimatorSpec>,
}

/// Annular rate analysis: buckets `[gamma^{i+1} delta_bar, gamma^i delta_bar)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnuliSpec {
    /// Outer scale; defaults to the starting distance to the reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_bar: Option<f64>,
    pub gamma: f64,
}

/// One estimator invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EstimatorSpec {
    /// Violation profile of the run's operator at `y`.
    #[serde(rename = "violation_profile")]
    ViolationProfile {
        name: String,
        y: Point,
        region: SampleRegion,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha_grid: Option<Vec<f64>>,
    },
    /// Modulus of metric subregularity of the run's operator minus the
    /// identity, for zero.
    #[serde(rename = "subregularity")]
    Subregularity {
        name: String,
        zero_set: ZeroSet,
        region: SampleRegion,
    },
    /// Elemental subregularity of a set at `xbar` for the pair `(y, v)`.
    #[serde(rename = "elemental")]
    Elemental {
        name: String,
        set: SetSpec,
        xbar: Point,
        y: Point,
        v: Point,
        region: SampleRegion,
    },
    /// Subtransversality of a collection at the cycle `xbar` for `zeta`.
    #[serde(rename = "subtransversality")]
    Subtransversality {
        name: String,
        sets: Vec<SetSpec>,
        xbar: ProductPoint,
        zeta: DifferenceVector,
        region: SampleRegion,
        lambda: Affine,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inverse: Option<Vec<ProductPoint>>,
    },
    /// Coupling constant of cyclic projections.
    #[serde(rename = "sigma")]
    Sigma {
        name: String,
        sets: Vec<SetSpec>,
        zeta: DifferenceVector,
        region: SampleRegion,
        lambda: Affine,
    },
    /// Modulus of metric subregularity of the shifted cyclic-projections
    /// operator on the product space.
    #[serde(rename = "shifted_subregularity")]
    ShiftedSubregularity {
        name: String,
        sets: Vec<SetSpec>,
        zeta: DifferenceVector,
        zero_set: ZeroSet,
        region: SampleRegion,
    },
}

impl EstimatorSpec {
    pub fn name(&self) -> &str {
        match self {
            EstimatorSpec::ViolationProfile { name, .. }
            | EstimatorSpec::Subregularity { name, .. }
            | EstimatorSpec::Elemental { name, .. }
            | EstimatorSpec::Subtransversality { name, .. }
            | EstimatorSpec::Sigma { name, .. }
            | EstimatorSpec::ShiftedSubregularity { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; `.` in emitted files, overridden by `--out`.
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl OutputSpec {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl ExperimentConfig {
    /// Parses a config file, rejecting unknown fields with a diagnostic
    /// naming the offending key.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Semantic validation beyond the serde schema.
    pub fn validate(&self) -> Result<()> {
        match (&self.problem.case, &self.problem.algorithm) {
            (None, None) => {
                return Err(CliError::Config(
                    "problem needs either a named case or an explicit algorithm".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "problem: give either case or algorithm, not both".into(),
                ))
            }
            _ => {}
        }
        if let Some(alg) = &self.problem.algorithm {
            alg.validate()
                .map_err(|e| CliError::Config(format!("problem.algorithm: {e}")))?;
        }
        if let Some(sets) = &self.problem.sets {
            for (i, s) in sets.iter().enumerate() {
                s.validate()
                    .map_err(|e| CliError::Config(format!("problem.sets[{i}]: {e}")))?;
            }
        }
        if let Some(fns) = &self.problem.functions {
            for (i, f) in fns.iter().enumerate() {
                f.validate()
                    .map_err(|e| CliError::Config(format!("problem.functions[{i}]: {e}")))?;
            }
        }
        self.run
            .stop
            .validate()
            .map_err(|e| CliError::Config(format!("run.stop: {e}")))?;
        self.run
            .policy
            .validate()
            .map_err(|e| CliError::Config(format!("run.policy: {e}")))?;
        if let Some(analysis) = &self.analysis {
            if let Some(r) = &analysis.reference {
                r.validate()
                    .map_err(|e| CliError::Config(format!("analysis.reference: {e}")))?;
            }
            if let Some(a) = &analysis.annuli {
                if !(a.gamma > 0.0 && a.gamma < 1.0) {
                    return Err(CliError::Config(format!(
                        "analysis.annuli.gamma must lie in (0, 1), got {}",
                        a.gamma
                    )));
                }
            }
            for est in &analysis.estimators {
                est.validate()
                    .map_err(|e| CliError::Config(format!("analysis.estimators: {e}")))?;
            }
        }
        for f in &self.output.formats {
            if f != "csv" && f != "json" {
                return Err(CliError::Config(format!(
                    "output.formats entries must be csv or json, got {f}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical hash over the meta-stripped compact encoding.
    pub fn config_hash(&self) -> Result<String> {
        let mut stripped = self.clone();
        stripped.meta = None;
        let bytes = serde_json::to_vec(&stripped)?;
        Ok(crate::output::short_hash(&bytes))
    }

    /// The effective seed: the environment variable `FIXPOINT_SEED`
    /// overrides the configured one.
    pub fn effective_seed(&self) -> u64 {
        std::env::var("FIXPOINT_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(self.run.seed)
    }
}

impl EstimatorSpec {
    fn validate(&self) -> fixpoint_core::Result<()> {
        match self {
            EstimatorSpec::ViolationProfile { region, .. }
            | EstimatorSpec::Subregularity { region, .. }
            | EstimatorSpec::Elemental { region, .. }
            | EstimatorSpec::Subtransversality { region, .. }
            | EstimatorSpec::Sigma { region, .. }
            | EstimatorSpec::ShiftedSubregularity { region, .. } => region.validate(),
        }
    }
}

/// Replaces the scalar at a dotted path (`problem.params.r`,
/// `run.x0.1`, ...) in the JSON encoding of a config with a new value and
/// re-parses.  Array elements are addressed by numeric segments.
pub fn patch_scalar(config: &ExperimentConfig, path: &str, value: f64) -> Result<ExperimentConfig> {
    let mut tree = serde_json::to_value(config)?;
    {
        let mut node = &mut tree;
        let segments: Vec<&str> = path.split('.').collect();
        if segments.is_empty() {
            return Err(CliError::PathResolution("empty path".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            match node {
                serde_json::Value::Object(map) => {
                    let entry = map.get_mut(*seg).ok_or_else(|| {
                        CliError::PathResolution(format!(
                            "no field '{seg}' at '{}'",
                            segments[..=i].join(".")
                        ))
                    })?;
                    if last {
                        if !entry.is_number() {
                            return Err(CliError::PathResolution(format!(
                                "'{path}' does not resolve to a scalar"
                            )));
                        }
                        *entry = serde_json::json!(value);
                        break;
                    }
                    node = entry;
                }
                serde_json::Value::Array(items) => {
                    let idx: usize = seg.parse().map_err(|_| {
                        CliError::PathResolution(format!("'{seg}' is not an array index"))
                    })?;
                    let entry = items.get_mut(idx).ok_or_else(|| {
                        CliError::PathResolution(format!("index {idx} out of bounds"))
                    })?;
                    if last {
                        if !entry.is_number() {
                            return Err(CliError::PathResolution(format!(
                                "'{path}' does not resolve to a scalar"
                            )));
                        }
                        *entry = serde_json::json!(value);
                        break;
                    }
                    node = entry;
                }
                _ => {
                    return Err(CliError::PathResolution(format!(
                        "'{}' is a scalar before the end of the path",
                        segments[..i].join(".")
                    )))
                }
            }
        }
    }
    let patched: ExperimentConfig = serde_json::from_value(tree)
        .map_err(|e| CliError::Config(format!("patched config invalid: {e}")))?;
    patched.validate()?;
    Ok(patched)
}
