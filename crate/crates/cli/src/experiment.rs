//! Executes one experiment config: the Picard run, the annular rate
//! analysis and the configured estimators, with CSV/JSON outputs.
//!
//! Case-study runners drive the same execution path and add their own
//! case-specific files on top, so a config emitted by a case study
//! replays to byte-identical trace/summary/estimate files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use fixpoint_core::driver::{annular_rate_analysis, picard, AnnulusRate, Outcome, Trace};
use fixpoint_core::operators::OperatorSpec;
use fixpoint_core::productspace::TZetaOperator;
use fixpoint_core::regularity::{
    default_alpha_grid, estimate_elemental_subregularity, estimate_sigma, estimate_subregularity,
    estimate_subtransversality, estimate_violation_profile, ViolationProfile,
};

use crate::casestudy::expand_algorithm;
use crate::config::{EstimatorSpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{fmt_opt, fmt_sig, write_csv, write_json, MetaBlock};

/// One named estimate, as serialized into `estimates.json`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRecord {
    pub name: String,
    pub kind: String,
    #[serde(flatten)]
    pub value: serde_json::Value,
    #[serde(skip)]
    pub constant: Option<f64>,
    #[serde(skip)]
    pub profile: Option<ViolationProfile>,
}

/// Result of executing a config.
#[derive(Debug, Clone)]
pub struct Execution {
    pub config: ExperimentConfig,
    pub meta: MetaBlock,
    pub algorithm: OperatorSpec,
    pub trace: Trace,
    pub annuli: Vec<AnnulusRate>,
    pub estimates: Vec<EstimateRecord>,
}

impl Execution {
    pub fn estimate(&self, name: &str) -> Option<&EstimateRecord> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.estimate(name).and_then(|e| e.constant)
    }
}

#[derive(Serialize)]
struct SummaryPayload<'a> {
    outcome: Outcome,
    iterations: usize,
    final_residual: f64,
    max_q: Option<f64>,
    annuli: &'a [AnnulusRate],
}

#[derive(Serialize)]
struct EstimatesPayload<'a> {
    estimates: &'a [EstimateRecord],
}

/// Resolves the problem block into a concrete operator.
pub fn resolve_algorithm(config: &ExperimentConfig) -> Result<OperatorSpec> {
    if let Some(alg) = &config.problem.algorithm {
        return Ok(alg.clone());
    }
    let name = config
        .problem
        .case
        .as_deref()
        .ok_or_else(|| CliError::Config("problem has neither case nor algorithm".into()))?;
    let params = config.problem.params.clone().unwrap_or_default();
    expand_algorithm(name, &params)
}

fn run_estimator(spec: &EstimatorSpec, algorithm: &OperatorSpec) -> Result<EstimateRecord> {
    let record = match spec {
        EstimatorSpec::ViolationProfile {
            name,
            y,
            region,
            alpha_grid,
        } => {
            let grid = alpha_grid
                .clone()
                .unwrap_or_else(|| default_alpha_grid(algorithm.theoretical_alpha()));
            let profile = estimate_violation_profile(algorithm, y, region, &grid)?;
            EstimateRecord {
                name: name.clone(),
                kind: "violation_profile".into(),
                value: serde_json::to_value(&profile)?,
                constant: None,
                profile: Some(profile),
            }
        }
        EstimatorSpec::Subregularity {
            name,
            zero_set,
            region,
        } => {
            let report = estimate_subregularity(algorithm, zero_set, region)?;
            EstimateRecord {
                name: name.clone(),
                kind: "subregularity".into(),
                value: serde_json::to_value(&report)?,
                constant: Some(report.constant),
                profile: None,
            }
        }
        EstimatorSpec::Elemental {
            name,
            set,
            xbar,
            y,
            v,
            region,
        } => {
            let report = estimate_elemental_subregularity(set, xbar, (y, v), region)?;
            EstimateRecord {
                name: name.clone(),
                kind: "elemental".into(),
                value: serde_json::to_value(&report)?,
                constant: Some(report.constant),
                profile: None,
            }
        }
        EstimatorSpec::Subtransversality {
            name,
            sets,
            xbar,
            zeta,
            region,
            lambda,
            inverse,
        } => {
            let report =
                estimate_subtransversality(sets, xbar, zeta, region, lambda, inverse.as_deref())?;
            EstimateRecord {
                name: name.clone(),
                kind: "subtransversality".into(),
                value: serde_json::to_value(&report)?,
                constant: Some(report.constant),
                profile: None,
            }
        }
        EstimatorSpec::Sigma {
            name,
            sets,
            zeta,
            region,
            lambda,
        } => {
            let report = estimate_sigma(sets, zeta, region, lambda)?;
            EstimateRecord {
                name: name.clone(),
                kind: "sigma".into(),
                value: serde_json::to_value(&report)?,
                constant: Some(report.constant),
                profile: None,
            }
        }
        EstimatorSpec::ShiftedSubregularity {
            name,
            sets,
            zeta,
            zero_set,
            region,
        } => {
            let op = TZetaOperator {
                sets: sets.clone(),
                zeta: zeta.clone(),
            };
            let report = estimate_subregularity(&op, zero_set, region)?;
            EstimateRecord {
                name: name.clone(),
                kind: "shifted_subregularity".into(),
                value: serde_json::to_value(&report)?,
                constant: Some(report.constant),
                profile: None,
            }
        }
    };
    Ok(record)
}

pub(crate) fn trace_csv(trace: &Trace) -> String {
    let dim = trace.iterates[0].dim();
    let mut out = String::from("k");
    for i in 0..dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",residual,dist_to_S,q_factor\n");
    for (k, x) in trace.iterates.iter().enumerate() {
        out.push_str(&k.to_string());
        for c in x.coords() {
            out.push(',');
            out.push_str(&fmt_sig(*c));
        }
        out.push(',');
        out.push_str(&fmt_sig(trace.residuals[k]));
        out.push(',');
        out.push_str(&fmt_opt(trace.ref_distances.as_ref().map(|d| d[k])));
        out.push(',');
        out.push_str(&fmt_opt(trace.q_factors.get(k).copied()));
        out.push('\n');
    }
    out
}

/// Executes a config.  When `outdir` is given, writes `trace.csv`,
/// `summary.json`, `estimates.json` and one `profile_<name>.csv` per
/// violation profile, honoring `output.formats`.
pub fn execute(config: &ExperimentConfig, outdir: Option<&Path>) -> Result<Execution> {
    config.validate()?;
    let mut config = config.clone();
    config.run.seed = config.effective_seed();
    let hash = config.config_hash()?;
    let meta = MetaBlock::new(config.run.seed, hash);
    config.meta = Some(meta.clone());

    let algorithm = resolve_algorithm(&config)?;
    let reference = config.analysis.as_ref().and_then(|a| a.reference.clone());
    let trace = picard(
        &algorithm,
        &config.run.x0,
        &config.run.stop,
        &config.run.policy,
        reference.as_ref(),
    )?;

    let mut annuli = Vec::new();
    if let Some(analysis) = &config.analysis {
        if let Some(spec) = &analysis.annuli {
            let delta_bar = match spec.delta_bar {
                Some(d) => d,
                None => trace
                    .ref_distances
                    .as_ref()
                    .and_then(|d| d.first().copied())
                    .ok_or(fixpoint_core::Error::MissingReference)?,
            };
            annuli = annular_rate_analysis(&trace, delta_bar, spec.gamma)?;
        }
    }

    let mut estimates = Vec::new();
    if let Some(analysis) = &config.analysis {
        for spec in &analysis.estimators {
            estimates.push(run_estimator(spec, &algorithm)?);
        }
    }

    if let Some(dir) = outdir {
        std::fs::create_dir_all(dir)?;
        if config.output.wants("csv") {
            write_csv(&dir.join("trace.csv"), &meta, &trace_csv(&trace))?;
            for record in &estimates {
                if let Some(profile) = &record.profile {
                    write_csv(
                        &dir.join(format!("profile_{}.csv", record.name)),
                        &meta,
                        &profile.to_csv(fmt_sig),
                    )?;
                }
            }
        }
        if config.output.wants("json") {
            write_json(
                &dir.join("summary.json"),
                &meta,
                &SummaryPayload {
                    outcome: trace.outcome,
                    iterations: trace.steps(),
                    final_residual: trace.final_residual(),
                    max_q: trace.max_q_from(0),
                    annuli: &annuli,
                },
            )?;
            if !estimates.is_empty() {
                write_json(
                    &dir.join("estimates.json"),
                    &meta,
                    &EstimatesPayload {
                        estimates: &estimates,
                    },
                )?;
            }
        }
    }

    Ok(Execution {
        config,
        meta,
        algorithm,
        trace,
        annuli,
        estimates,
    })
}

/// Runs a config file; `--out` overrides the configured directory.
pub fn run_config(path: &Path, out_override: Option<&Path>) -> Result<(Execution, PathBuf)> {
    let config = ExperimentConfig::from_path(path)?;
    let dir: PathBuf = match out_override {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(&config.output.directory),
    };
    let execution = execute(&config, Some(&dir))?;
    Ok((execution, dir))
}

/// One parameter-sweep row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Outcome,
    pub iterations: usize,
    pub max_q: Option<f64>,
    pub certified_c: Option<f64>,
}

/// Sweeps a scalar parameter over the given values.  Rows run
/// concurrently; the merged CSV is sorted by value.
pub fn sweep(
    config: &ExperimentConfig,
    param: &str,
    values: &[f64],
    outdir: &Path,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    // Fail early on unresolvable paths rather than inside worker threads.
    if let Some(first) = values.first() {
        patch_scalar_checked(config, param, *first)?;
    }
    let mut rows: Vec<(usize, Result<SweepRow>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let config = config.clone();
                let param = param.to_string();
                let v = *v;
                scope.spawn(move || (i, sweep_row(&config, &param, v)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    rows.sort_by_key(|(i, _)| *i);
    let mut out = Vec::with_capacity(rows.len());
    for (_, row) in rows {
        out.push(row?);
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value));

    std::fs::create_dir_all(outdir)?;
    let meta = MetaBlock::new(config.effective_seed(), config.config_hash()?);
    let mut body = String::from("value,outcome,iterations,max_q,certified_c\n");
    for row in &out {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_sig(row.value),
            serde_json::to_value(row.outcome)?.as_str().unwrap_or(""),
            row.iterations,
            fmt_opt(row.max_q),
            fmt_opt(row.certified_c),
        ));
    }
    write_csv(&outdir.join("sweep.csv"), &meta, &body)?;
    Ok(out)
}

fn patch_scalar_checked(
    config: &ExperimentConfig,
    param: &str,
    value: f64,
) -> Result<ExperimentConfig> {
    crate::config::patch_scalar(config, param, value)
}

fn sweep_row(config: &ExperimentConfig, param: &str, value: f64) -> Result<SweepRow> {
    let patched = patch_scalar_checked(config, param, value)?;
    let execution = execute(&patched, None)?;
    let certified_c = match (&patched.problem.case, &patched.problem.params) {
        (Some(name), params) => {
            crate::casestudy::closed_form_c(name, params.as_ref().cloned().unwrap_or_default())
        }
        _ => None,
    };
    Ok(SweepRow {
        value,
        outcome: execution.trace.outcome,
        iterations: execution.trace.steps(),
        max_q: execution.trace.max_q_from(0),
        certified_c,
    })
}
