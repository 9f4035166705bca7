//! Named case studies: end-to-end runs with closed-form constants,
//! estimator cross-checks and machine-readable pass/fail lists.
//!
//! Every study emits a replayable `config.json` (the generic runner
//! reproduces `trace.csv`, `summary.json` and `estimates.json` from it
//! byte for byte), a comparison table of closed-form vs estimated vs
//! observed values, certificates, and `checks.json`; the process exit
//! status is 0 exactly when all checks pass.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use fixpoint_core::driver::{picard, verdict, Outcome, StopRule};
use fixpoint_core::geometry::{
    dft_real_matrix, distance, project, reflect, Affine, FunctionSpec, SetSpec,
};
use fixpoint_core::matrix::Matrix;
use fixpoint_core::operators::{
    apply, douglas_rachford, forward_backward, raar, OperatorKind, OperatorSpec, SelectionPolicy,
};
use fixpoint_core::point;
use fixpoint_core::point::Point;
use fixpoint_core::productspace::{difference_vectors, DifferenceVector, ProductPoint};
use fixpoint_core::regularity::{
    certify_linear_rate, closed_form_constants, tangent_gauge_g, ClosedFormCase, RateCertificate,
    SampleRegion, ZeroSet,
};

use crate::config::{
    AnalysisSpec, AnnuliSpec, EstimatorSpec, ExperimentConfig, OutputSpec, ProblemSpec, RunSpec,
};
use crate::error::{CliError, Result};
use crate::experiment::{execute, trace_csv};
use crate::output::{fmt_opt, fmt_sig, write_csv, write_json, MetaBlock};

pub const CASE_NAMES: &[&str] = &[
    "triangle",
    "circles",
    "tangent",
    "fb_soft_threshold",
    "dr_vs_raar",
    "phase_retrieval_toy",
    "inhomogeneous_fixed_points",
];

/// One acceptance check of a study.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Result of a study run.
#[derive(Debug)]
pub struct CaseOutcome {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    constant: String,
    closed_form: Option<f64>,
    estimated: Option<f64>,
    observed: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct NamedCertificate {
    name: String,
    #[serde(flatten)]
    certificate: RateCertificate,
}

/// Accumulates checks, comparison rows and certificates for one study and
/// writes the per-study files.
struct Study {
    name: String,
    out: PathBuf,
    meta: MetaBlock,
    checks: Vec<Check>,
    comparison: Vec<CompareRow>,
    certificates: Vec<NamedCertificate>,
}

impl Study {
    fn new(name: &str, out: &Path, meta: MetaBlock) -> Self {
        Study {
            name: name.to_string(),
            out: out.to_path_buf(),
            meta,
            checks: Vec::new(),
            comparison: Vec::new(),
            certificates: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            detail,
        });
    }

    fn row(
        &mut self,
        constant: &str,
        closed_form: Option<f64>,
        estimated: Option<f64>,
        observed: Option<f64>,
    ) {
        self.comparison.push(CompareRow {
            constant: constant.to_string(),
            closed_form,
            estimated,
            observed,
        });
    }

    fn certificate(&mut self, name: &str, certificate: RateCertificate) {
        self.certificates.push(NamedCertificate {
            name: name.to_string(),
            certificate,
        });
    }

    fn finish(self, config: &ExperimentConfig) -> Result<CaseOutcome> {
        std::fs::create_dir_all(&self.out)?;
        // Replayable config (meta carries version/seed/hash).
        let mut text = serde_json::to_string_pretty(config)?;
        text.push('\n');
        std::fs::write(self.out.join("config.json"), text)?;

        let mut body = String::from("constant,closed_form,estimated,observed\n");
        for row in &self.comparison {
            body.push_str(&format!(
                "{},{},{},{}\n",
                row.constant,
                fmt_opt(row.closed_form),
                fmt_opt(row.estimated),
                fmt_opt(row.observed)
            ));
        }
        write_csv(&self.out.join("comparison.csv"), &self.meta, &body)?;

        #[derive(Serialize)]
        struct CertificatesPayload<'a> {
            certificates: &'a [NamedCertificate],
        }
        write_json(
            &self.out.join("certificate.json"),
            &self.meta,
            &CertificatesPayload {
                certificates: &self.certificates,
            },
        )?;

        let pass = self.checks.iter().all(|c| c.pass);
        #[derive(Serialize)]
        struct ChecksPayload<'a> {
            case: &'a str,
            pass: bool,
            checks: &'a [Check],
        }
        write_json(
            &self.out.join("checks.json"),
            &self.meta,
            &ChecksPayload {
                case: &self.name,
                pass,
                checks: &self.checks,
            },
        )?;

        Ok(CaseOutcome {
            name: self.name,
            pass,
            checks: self.checks,
            out_dir: self.out,
        })
    }
}

// ---------------------------------------------------------------------
// Parameter handling
// ---------------------------------------------------------------------

fn ensure_known(params: &BTreeMap<String, Value>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Config(format!(
                "unknown parameter '{key}' (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn param_f64(params: &BTreeMap<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| CliError::Config(format!("parameter '{key}' must be a number"))),
    }
}

fn param_u64(params: &BTreeMap<String, Value>, key: &str, default: u64) -> Result<u64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| CliError::Config(format!("parameter '{key}' must be an integer"))),
    }
}

fn param_bool(params: &BTreeMap<String, Value>, key: &str, default: bool) -> Result<bool> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_bool()
            .ok_or_else(|| CliError::Config(format!("parameter '{key}' must be a boolean"))),
    }
}

fn param_vec_f64(params: &BTreeMap<String, Value>, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    match params.get(key) {
        None => Ok(default.to_vec()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| CliError::Config(format!("'{key}' entries must be numbers")))
            })
            .collect(),
        Some(_) => Err(CliError::Config(format!(
            "parameter '{key}' must be an array"
        ))),
    }
}

// ---------------------------------------------------------------------
// Case geometry
// ---------------------------------------------------------------------

fn triangle_sets() -> Vec<SetSpec> {
    let s3 = 3.0f64.sqrt();
    vec![
        SetSpec::labeled(
            fixpoint_core::geometry::SetKind::Hyperplane {
                normal: point![0.0, 1.0],
                offset: 0.0,
            },
            "line1",
        ),
        SetSpec::labeled(
            fixpoint_core::geometry::SetKind::Hyperplane {
                normal: point![-s3, 1.0],
                offset: s3,
            },
            "line2",
        ),
        SetSpec::labeled(
            fixpoint_core::geometry::SetKind::Hyperplane {
                normal: point![s3, 1.0],
                offset: s3,
            },
            "line3",
        ),
    ]
}

fn circle_sets(r: f64) -> Vec<SetSpec> {
    vec![
        SetSpec::sphere(point![0.0, 0.0], 1.0),
        SetSpec::sphere(point![0.0, -(0.5 + r)], 2.0 + r),
    ]
}

fn parallel_lines(gap: f64) -> (SetSpec, SetSpec) {
    (
        SetSpec::hyperplane(point![0.0, 1.0], 0.0),
        SetSpec::hyperplane(point![0.0, 1.0], gap),
    )
}

/// Orthonormal diagonal basis of the slice `{x - Pi x = const}` of
/// `(R^n)^m`, in flattened coordinates.
fn diagonal_basis(m: usize, n: usize) -> Vec<Point> {
    let scale = 1.0 / (m as f64).sqrt();
    (0..n)
        .map(|i| {
            let mut coords = vec![0.0; m * n];
            for j in 0..m {
                coords[j * n + i] = scale;
            }
            Point::new(coords)
        })
        .collect()
}

/// Planted toy phase-retrieval instance: an `n`-component complex signal
/// (interleaved in `R^{2n}`) supported on the first half of the entries,
/// its Fourier modulus (optionally inflated by `perturbation` to make the
/// instance inconsistent), and the support box.
fn phase_instance(
    n: usize,
    signal_seed: u64,
    perturbation: f64,
) -> Result<(SetSpec, SetSpec, Point)> {
    if !(2..=16).contains(&n) {
        return Err(CliError::Config(format!(
            "toy phase retrieval supports 2 <= n <= 16, got {n}"
        )));
    }
    let support = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(signal_seed);
    let mut coords = vec![0.0; 2 * n];
    for c in coords.iter_mut().take(2 * support) {
        *c = rng.gen_range(-1.0..1.0);
    }
    let planted = Point::new(coords);
    let dft = dft_real_matrix(n);
    let y = dft.matvec(planted.coords());
    let modulus: Vec<f64> = (0..n)
        .map(|k| y[2 * k].hypot(y[2 * k + 1]) * (1.0 + perturbation))
        .collect();
    if modulus.iter().any(|b| *b < 1e-6) {
        return Err(CliError::Config(
            "planted signal has a vanishing Fourier component; choose another signal_seed".into(),
        ));
    }
    let magnitude_set = SetSpec::labeled(
        fixpoint_core::geometry::SetKind::FourierMagnitude {
            modulus,
            transform: "dft".into(),
        },
        "magnitude",
    );
    let mut lower = vec![0.0; 2 * n];
    let mut upper = vec![0.0; 2 * n];
    for i in 0..2 * support {
        lower[i] = -10.0;
        upper[i] = 10.0;
    }
    let support_set = SetSpec::labeled(
        fixpoint_core::geometry::SetKind::Box { lower, upper },
        "support",
    );
    Ok((magnitude_set, support_set, planted))
}

// ---------------------------------------------------------------------
// Problem expansion (shared with the generic runner and sweeps)
// ---------------------------------------------------------------------

/// Expands a named case with parameters into its fixed-point operator.
pub fn expand_algorithm(name: &str, params: &BTreeMap<String, Value>) -> Result<OperatorSpec> {
    match name {
        "triangle" => {
            ensure_known(params, &[])?;
            Ok(OperatorSpec::labeled(
                OperatorKind::CyclicProjections {
                    sets: triangle_sets(),
                },
                "triangle cyclic projections",
            ))
        }
        "circles" => {
            let r = param_f64(params, "r", 1.0)?;
            ensure_known(params, &["r"])?;
            if r <= 0.0 {
                return Err(CliError::Config(format!("r must be positive, got {r}")));
            }
            Ok(OperatorSpec::labeled(
                OperatorKind::CyclicProjections {
                    sets: circle_sets(r),
                },
                "two-circle cyclic projections",
            ))
        }
        "tangent" => {
            ensure_known(params, &[])?;
            let line = SetSpec::hyperplane(point![0.0, 1.0], -1.0);
            let circle = SetSpec::sphere(point![0.0, 0.0], 1.0);
            Ok(OperatorSpec::labeled(
                OperatorKind::Compose {
                    operators: vec![
                        OperatorSpec::projector(line),
                        OperatorSpec::projector(circle),
                    ],
                },
                "tangent alternating projections",
            ))
        }
        "fb_soft_threshold" => {
            let a_diag = param_vec_f64(params, "a_diag", &[2.0, 1.0])?;
            let weight = param_f64(params, "weight", 0.1)?;
            let t = param_f64(params, "t", 0.1)?;
            ensure_known(params, &["a_diag", "weight", "t"])?;
            let dim = a_diag.len();
            let f = FunctionSpec::quadratic(Matrix::diagonal(&a_diag), Point::zeros(dim));
            let g = FunctionSpec::l1(weight, vec![1.0; dim]);
            Ok(forward_backward(f, g, t)?)
        }
        "dr_vs_raar" => {
            let gap = param_f64(params, "gap", 1.0)?;
            let _beta = param_f64(params, "beta", 0.7)?;
            let _n = param_u64(params, "n", 4)?;
            let _signal_seed = param_u64(params, "signal_seed", 42)?;
            let _perturbation = param_f64(params, "perturbation", 0.1)?;
            ensure_known(params, &["gap", "beta", "n", "signal_seed", "perturbation"])?;
            let (a, b) = parallel_lines(gap);
            Ok(douglas_rachford(
                FunctionSpec::indicator(a),
                FunctionSpec::indicator(b),
            )?)
        }
        "phase_retrieval_toy" => {
            let n = param_u64(params, "n", 4)? as usize;
            let consistent = param_bool(params, "consistent", true)?;
            let beta = param_f64(params, "beta", 0.7)?;
            let signal_seed = param_u64(params, "signal_seed", 42)?;
            let perturbation = param_f64(params, "perturbation", 0.1)?;
            ensure_known(
                params,
                &["n", "consistent", "beta", "signal_seed", "perturbation"],
            )?;
            let effective = if consistent { 0.0 } else { perturbation };
            let (magnitude, support, _) = phase_instance(n, signal_seed, effective)?;
            if consistent {
                Ok(OperatorSpec::labeled(
                    OperatorKind::CyclicProjections {
                        sets: vec![magnitude, support],
                    },
                    "toy phase retrieval, cyclic projections",
                ))
            } else {
                Ok(raar(magnitude, support, beta)?)
            }
        }
        "inhomogeneous_fixed_points" => {
            ensure_known(params, &[])?;
            // Half-plane {2 x1 + x2 >= 3} and the complement of the open
            // positive orthant; the latter's projector has finite ties.
            let half = SetSpec::half_space(point![-2.0, -1.0], -3.0);
            let orthant = SetSpec::orthant_complement(2);
            Ok(OperatorSpec::labeled(
                OperatorKind::Compose {
                    operators: vec![
                        OperatorSpec::projector(half),
                        OperatorSpec::projector(orthant),
                    ],
                },
                "alternating projections with branching",
            ))
        }
        other => Err(CliError::Config(format!(
            "unknown case study '{other}' (known: {})",
            CASE_NAMES.join(", ")
        ))),
    }
}

/// Closed-form certified rate of a named case, when one exists; used by
/// sweep rows.
pub fn closed_form_c(name: &str, params: BTreeMap<String, Value>) -> Option<f64> {
    match name {
        "triangle" => closed_form_constants(&ClosedFormCase::Triangle)
            .ok()
            .and_then(|t| t.get("c").copied()),
        "circles" => {
            let r = params.get("r").and_then(|v| v.as_f64()).unwrap_or(1.0);
            closed_form_constants(&ClosedFormCase::Circles { r })
                .ok()
                .and_then(|t| t.get("c_bound").copied())
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------

fn take_seed(params: &mut BTreeMap<String, Value>, default: u64) -> Result<u64> {
    match params.remove("seed") {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| CliError::Config("parameter 'seed' must be an integer".into())),
    }
}

fn base_config(
    case: &str,
    params: BTreeMap<String, Value>,
    x0: Point,
    stop: StopRule,
    seed: u64,
    analysis: Option<AnalysisSpec>,
) -> ExperimentConfig {
    ExperimentConfig {
        meta: None,
        problem: ProblemSpec {
            case: Some(case.to_string()),
            params: if params.is_empty() {
                None
            } else {
                Some(params)
            },
            sets: None,
            functions: None,
            algorithm: None,
        },
        run: RunSpec {
            x0,
            stop,
            policy: SelectionPolicy::LexicographicMin,
            seed,
        },
        analysis,
        output: OutputSpec {
            directory: ".".into(),
            formats: vec!["csv".into(), "json".into()],
        },
    }
}

fn rel_err(value: f64, target: f64) -> f64 {
    (value / target - 1.0).abs()
}

fn seeded_ball_points(center: &Point, radius: f64, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..center.dim())
                .map(|_| rng.gen_range(-1.0..1.0f64))
                .collect();
            let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-9);
            let r = radius * rng.gen_range(0.0..1.0f64).powf(1.0 / center.dim() as f64);
            let coords: Vec<f64> = center
                .coords()
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + r * d / norm)
                .collect();
            Point::new(coords)
        })
        .collect()
}

fn triangle_case_data() -> Result<(Vec<SetSpec>, Point, DifferenceVector, ProductPoint)> {
    let sets = triangle_sets();
    let u_bar = point![-1.0 / 3.0, 0.0];
    let mut dvs = difference_vectors(&sets, &u_bar, 16)?;
    let zeta = dvs.remove(0);
    let xbar = zeta.source_cycle.clone();
    Ok((sets, u_bar, zeta, xbar))
}

// ---------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------

fn triangle_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    ensure_known(&params, &[])?;
    let (sets, u_bar, zeta, xbar) = triangle_case_data()?;
    let starts = seeded_ball_points(&u_bar, 1.0, 20, seed);
    let flat = xbar.flatten();
    let w_basis = diagonal_basis(3, 2);
    let slice_basis =
        vec![Point::new(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).scale(1.0 / 3.0f64.sqrt())];

    let analysis = AnalysisSpec {
        reference: Some(ZeroSet::points(vec![u_bar.clone()])),
        annuli: Some(AnnuliSpec {
            delta_bar: None,
            gamma: 0.5,
        }),
        estimators: vec![
            EstimatorSpec::Subtransversality {
                name: "kappa".into(),
                sets: sets.clone(),
                xbar: xbar.clone(),
                zeta: zeta.clone(),
                region: SampleRegion::annulus(flat.clone(), 0.01, 1.0, 400, seed ^ 0x5u64),
                lambda: Affine::new(flat.clone(), w_basis.clone()),
                inverse: Some(vec![xbar.clone()]),
            },
            EstimatorSpec::Sigma {
                name: "sigma".into(),
                sets: sets.clone(),
                zeta: zeta.clone(),
                region: SampleRegion::annulus(flat.clone(), 0.01, 1.0, 400, seed ^ 0x6u64),
                lambda: Affine::new(flat.clone(), w_basis.clone()),
            },
            EstimatorSpec::ShiftedSubregularity {
                name: "kappa_bar".into(),
                sets: sets.clone(),
                zeta: zeta.clone(),
                zero_set: ZeroSet::points(vec![flat.clone()]),
                region: SampleRegion::annulus(flat.clone(), 0.01, 1.0, 200, seed ^ 0x7u64)
                    .on(Affine::new(flat.clone(), slice_basis)),
            },
            EstimatorSpec::ViolationProfile {
                name: "epsilon_profile".into(),
                y: u_bar.clone(),
                region: SampleRegion::ball(u_bar.clone(), 1.0, 300, seed ^ 0x8u64),
                alpha_grid: None,
            },
        ],
    };
    let config = base_config(
        "triangle",
        params,
        starts[0].clone(),
        StopRule::default(),
        seed,
        Some(analysis),
    );
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("triangle", out, execution.meta.clone());

    let closed = closed_form_constants(&ClosedFormCase::Triangle)?;
    let kappa_hat = execution.constant("kappa");
    let sigma_hat = execution.constant("sigma");
    let kappa_bar_hat = execution.constant("kappa_bar");
    let eps_hat = execution
        .estimate("epsilon_profile")
        .and_then(|e| e.profile.as_ref())
        .and_then(|p| p.epsilon_at(0.75));

    // All seeded starts must reach the fixed point.
    let reference = ZeroSet::points(vec![u_bar.clone()]);
    let mut all_converged = true;
    let mut worst_dist: f64 = 0.0;
    let mut worst_q_after_first: f64 = 0.0;
    let mut traces = Vec::new();
    for x0 in &starts {
        let trace = picard(
            &execution.algorithm,
            x0,
            &config.run.stop,
            &config.run.policy,
            Some(&reference),
        )?;
        all_converged &= trace.outcome == Outcome::Converged;
        worst_dist = worst_dist.max(trace.final_point().dist(&u_bar));
        if let Some(q) = trace.max_q_from(1) {
            worst_q_after_first = worst_q_after_first.max(q);
        }
        traces.push(trace);
    }
    study.check(
        "20 seeded starts converge to (-1/3, 0) within 1e-8",
        all_converged && worst_dist <= 1e-8,
        format!("worst final distance {}", fmt_sig(worst_dist)),
    );
    study.check(
        "estimated kappa within 5% of sqrt(2)",
        kappa_hat.map(|k| rel_err(k, closed["kappa"]) <= 0.05) == Some(true),
        format!("kappa_hat = {}", fmt_opt(kappa_hat)),
    );
    study.check(
        "estimated sigma within 5% of 4*sqrt(2)/9",
        sigma_hat.map(|s| rel_err(s, closed["sigma"]) <= 0.05) == Some(true),
        format!("sigma_hat = {}", fmt_opt(sigma_hat)),
    );
    let product = kappa_hat.zip(sigma_hat).map(|(k, s)| k * s);
    study.check(
        "kappa * sigma within 5% of 8/9",
        product.map(|p| rel_err(p, closed["kappa_bar"]) <= 0.05) == Some(true),
        format!("kappa_hat * sigma_hat = {}", fmt_opt(product)),
    );

    let mut closed_cert = certify_linear_rate(0.0, closed["alpha"], closed["kappa_bar"])?
        .as_closed_form()
        .with_provenance("closed-form triangle constants")
        .with_validity(SampleRegion::ball(u_bar.clone(), 1.0, 1, seed));
    // Pin the closed-form rate verbatim; the certification formula agrees
    // with it up to rounding through kappa_bar.
    debug_assert!((closed_cert.c.unwrap() - closed["c"]).abs() < 1e-12);
    closed_cert.c = Some(closed["c"]);
    let exact = closed_cert.c == Some(37.0f64.sqrt() / 8.0);
    study.check(
        "closed-form certificate c equals sqrt(37)/8 exactly",
        exact,
        format!("c = {}", fmt_opt(closed_cert.c)),
    );
    study.check(
        "observed q-factors after step 1 at most 0.780",
        worst_q_after_first <= 0.780,
        format!("worst q after step 1 = {}", fmt_sig(worst_q_after_first)),
    );

    let verdict = verdict(&execution.trace, &closed_cert)?;
    study.check(
        "observed contraction within certified c + 0.02",
        verdict.pass,
        format!(
            "observed {} vs certified {}",
            fmt_opt(verdict.observed_max_q),
            fmt_sig(verdict.certified_c)
        ),
    );

    // Sampled consistency of the fixed-cycle set: the distance to the
    // reference cycle never exceeds the distance to the zero set of the
    // shifted residual map computed through an independent route (the
    // Picard limit lifted by partial sums).
    let limit = traces[0].final_point().clone();
    let sums = zeta.partial_sums();
    let lifted_fix = ProductPoint::new(sums.iter().map(|s| limit.sub(s)).collect()).flatten();
    let mut cond_d = true;
    for probe in seeded_ball_points(&u_bar, 1.0, 50, seed ^ 0x9) {
        let x = ProductPoint::new(sums.iter().map(|s| probe.sub(s)).collect()).flatten();
        let d_cycle = x.dist(&flat);
        let d_zero = x.dist(&lifted_fix);
        if d_cycle > d_zero + 1e-8 {
            cond_d = false;
        }
    }
    study.check(
        "sampled distance bound dist(x, S) <= dist(x, zero set of shifted residual)",
        cond_d,
        "50 sampled points on the shifted slice".into(),
    );

    let est_cert = certify_linear_rate(
        eps_hat.map(|e| e.max(0.0)).unwrap_or(0.0),
        closed["alpha"],
        kappa_bar_hat.unwrap_or(f64::INFINITY),
    )?
    .with_provenance("estimated violation profile and shifted-operator modulus")
    .with_validity(SampleRegion::ball(u_bar.clone(), 1.0, 1, seed));

    study.row("kappa", Some(closed["kappa"]), kappa_hat, None);
    study.row("sigma", Some(closed["sigma"]), sigma_hat, None);
    study.row("kappa_bar", Some(closed["kappa_bar"]), kappa_bar_hat, None);
    study.row(
        "kappa_x_sigma",
        Some(closed["kappa_bar"]),
        kappa_hat.zip(sigma_hat).map(|(k, s)| k * s),
        None,
    );
    study.row("alpha", Some(closed["alpha"]), None, None);
    study.row(
        "epsilon(alpha=3/4)",
        Some(0.0),
        eps_hat.map(|e| e.max(0.0)),
        None,
    );
    study.row(
        "c",
        Some(closed["c"]),
        est_cert.c,
        Some(worst_q_after_first),
    );
    study.certificate("closed-form", closed_cert);
    study.certificate("estimated", est_cert);
    study.finish(&execution.config)
}

fn circles_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    let r = param_f64(&params, "r", 1.0)?;
    params.insert("r".into(), serde_json::json!(r));
    ensure_known(&params, &["r"])?;
    let sets = circle_sets(r);
    let u_bar = point![0.0, 1.0];
    let zeta = difference_vectors(&sets, &u_bar, 16)?.remove(0);
    let xbar = zeta.source_cycle.clone();
    let flat = xbar.flatten();
    let w_basis = diagonal_basis(2, 2);

    let analysis = AnalysisSpec {
        reference: Some(ZeroSet::points(vec![u_bar.clone()])),
        annuli: Some(AnnuliSpec {
            delta_bar: None,
            gamma: 0.5,
        }),
        estimators: vec![
            EstimatorSpec::Subtransversality {
                name: "kappa".into(),
                sets: sets.clone(),
                xbar: xbar.clone(),
                zeta: zeta.clone(),
                region: SampleRegion::annulus(flat.clone(), 0.0, 1e-3, 600, seed ^ 0x15u64),
                lambda: Affine::new(flat.clone(), w_basis.clone()),
                inverse: Some(vec![xbar.clone()]),
            },
            EstimatorSpec::Sigma {
                name: "sigma".into(),
                sets: sets.clone(),
                zeta: zeta.clone(),
                region: SampleRegion::annulus(flat.clone(), 0.0, 1e-3, 600, seed ^ 0x16u64),
                lambda: Affine::new(flat.clone(), w_basis.clone()),
            },
            EstimatorSpec::ShiftedSubregularity {
                name: "kappa_bar".into(),
                sets: sets.clone(),
                zeta: zeta.clone(),
                zero_set: ZeroSet::points(vec![flat.clone()]),
                region: SampleRegion::annulus(flat.clone(), 0.0, 1e-3, 400, seed ^ 0x17u64)
                    .on(Affine::new(flat.clone(), w_basis.clone())),
            },
        ],
    };
    let x0 = point![0.08, 1.03];
    let config = base_config(
        "circles",
        params,
        x0,
        StopRule::default(),
        seed,
        Some(analysis),
    );
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("circles", out, execution.meta.clone());

    let closed = closed_form_constants(&ClosedFormCase::Circles { r })?;
    let kappa_hat = execution.constant("kappa");
    let sigma_hat = execution.constant("sigma");
    let kappa_bar_hat = execution.constant("kappa_bar");

    study.check(
        "run converges to (0, 1) within 1e-8",
        execution.trace.outcome == Outcome::Converged
            && execution.trace.final_point().dist(&u_bar) <= 1e-8,
        format!(
            "final distance {}",
            fmt_sig(execution.trace.final_point().dist(&u_bar))
        ),
    );
    study.check(
        "estimated subtransversality within 5% of closed form",
        kappa_hat.map(|k| rel_err(k, closed["kappa"]) <= 0.05) == Some(true),
        format!(
            "kappa_hat = {} vs {}",
            fmt_opt(kappa_hat),
            fmt_sig(closed["kappa"])
        ),
    );
    study.check(
        "estimated sigma within 5% of the linearization value",
        sigma_hat.map(|s| rel_err(s, closed["sigma_derived"]) <= 0.05) == Some(true),
        format!(
            "sigma_hat = {} vs {}",
            fmt_opt(sigma_hat),
            fmt_sig(closed["sigma_derived"])
        ),
    );
    study.check(
        "shifted-operator modulus within 5% of kappa * sigma (linearization)",
        kappa_bar_hat.map(|k| rel_err(k, closed["kappa_bar_derived"]) <= 0.05) == Some(true),
        format!(
            "kappa_bar_hat = {} vs {}",
            fmt_opt(kappa_bar_hat),
            fmt_sig(closed["kappa_bar_derived"])
        ),
    );

    // Observed local rate near the fixed point against the c-bound.
    let mut local_q: f64 = 0.0;
    for (k, q) in execution.trace.q_factors.iter().enumerate() {
        if q.is_finite() && execution.trace.iterates[k].dist(&u_bar) <= 0.3 {
            local_q = local_q.max(*q);
        }
    }
    study.check(
        "observed local rate at most c-bound + 0.01",
        local_q <= closed["c_bound"] + 0.01,
        format!(
            "observed {} vs bound {}",
            fmt_sig(local_q),
            fmt_sig(closed["c_bound"])
        ),
    );

    let mut bound_cert = certify_linear_rate(0.0, closed["alpha"], closed["kappa_bar"])?
        .as_closed_form()
        .with_provenance("closed-form circle constants (classical bound chain)")
        .with_validity(SampleRegion::ball(u_bar.clone(), 0.3, 1, seed));
    debug_assert!((bound_cert.c.unwrap() - closed["c_bound"]).abs() < 1e-12);
    bound_cert.c = Some(closed["c_bound"]);
    let derived_cert = certify_linear_rate(0.0, closed["alpha"], closed["kappa_bar_derived"])?
        .as_closed_form()
        .with_provenance("projector linearization")
        .with_validity(SampleRegion::ball(u_bar.clone(), 0.3, 1, seed));

    study.row("kappa", Some(closed["kappa"]), kappa_hat, None);
    study.row("sigma", Some(closed["sigma"]), sigma_hat, None);
    study.row(
        "sigma_derived",
        Some(closed["sigma_derived"]),
        sigma_hat,
        None,
    );
    study.row("kappa_bar", Some(closed["kappa_bar"]), kappa_bar_hat, None);
    study.row(
        "kappa_bar_derived",
        Some(closed["kappa_bar_derived"]),
        kappa_bar_hat,
        None,
    );
    study.row(
        "c_bound",
        Some(closed["c_bound"]),
        derived_cert.c,
        Some(local_q),
    );
    study.certificate("closed-form-bound", bound_cert);
    study.certificate("derived", derived_cert);
    study.finish(&execution.config)
}

fn tangent_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    ensure_known(&params, &[])?;
    let xbar = point![0.0, -1.0];
    let on_line = Affine::new(xbar.clone(), vec![point![1.0, 0.0]]);
    let analysis = AnalysisSpec {
        reference: Some(ZeroSet::points(vec![xbar.clone()])),
        annuli: Some(AnnuliSpec {
            delta_bar: Some(1.0),
            gamma: 0.5,
        }),
        estimators: vec![EstimatorSpec::Subregularity {
            name: "modulus_R0".into(),
            zero_set: ZeroSet::points(vec![xbar.clone()]),
            region: SampleRegion::annulus(xbar.clone(), 0.5, 1.0, 2000, seed ^ 0x25u64).on(on_line),
        }],
    };
    let stop = StopRule {
        residual_tol: 1e-14,
        max_iter: 30_000,
        divergence_radius: 1e8,
    };
    let config = base_config(
        "tangent",
        params,
        point![1.0, -1.0],
        stop,
        seed,
        Some(analysis),
    );
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("tangent", out, execution.meta.clone());

    // Per-annulus closed forms and observed rates.
    let mut annuli_body = String::from("i,c_hat,count,c_bound\n");
    let mut per_annulus: BTreeMap<u32, f64> = BTreeMap::new();
    for rate in &execution.annuli {
        per_annulus.insert(rate.i, rate.c_hat);
    }
    let mut all_bounded = true;
    let mut populated = true;
    let mut nondecreasing = true;
    let mut prev: Option<f64> = None;
    for i in 0..=6u32 {
        let closed = closed_form_constants(&ClosedFormCase::Tangent { i })?;
        let c_bound = closed["c"];
        match per_annulus.get(&i) {
            Some(c_hat) => {
                if *c_hat > c_bound + 0.05 {
                    all_bounded = false;
                }
                if let Some(p) = prev {
                    if *c_hat < p - 1e-12 {
                        nondecreasing = false;
                    }
                }
                prev = Some(*c_hat);
                let count = execution
                    .annuli
                    .iter()
                    .find(|r| r.i == i)
                    .map(|r| r.count)
                    .unwrap_or(0);
                annuli_body.push_str(&format!(
                    "{i},{},{count},{}\n",
                    fmt_sig(*c_hat),
                    fmt_sig(c_bound)
                ));
            }
            None => populated = false,
        }
        study.certificate(
            &format!("annulus_{i}"),
            certify_linear_rate(0.0, 2.0 / 3.0, closed["modulus"])?
                .as_closed_form()
                .with_provenance(format!("tangent annulus {i} closed form"))
                .with_validity(SampleRegion::annulus(
                    xbar.clone(),
                    0.5f64.powi(i as i32 + 1),
                    0.5f64.powi(i as i32),
                    1,
                    seed,
                )),
        );
    }
    write_csv(&out.join("annuli.csv"), &execution.meta, &annuli_body)?;

    study.check(
        "annuli 0..6 are populated",
        populated,
        format!("{} annuli observed", execution.annuli.len()),
    );
    study.check(
        "per-annulus rates nondecreasing toward 1",
        nondecreasing && prev.map(|p| p >= 0.999).unwrap_or(false),
        format!("last observed rate {}", fmt_opt(prev)),
    );
    study.check(
        "per-annulus rates within closed-form bound + 0.05",
        all_bounded,
        "compare annuli.csv columns".into(),
    );

    // Per-step gauge bound dist(x+, S) <= g(dist(x, S)) + 1e-10.
    let dists = execution.trace.ref_distances.as_ref().unwrap();
    let mut gauge_ok = true;
    for k in 0..execution.trace.steps() {
        if dists[k + 1] > tangent_gauge_g(dists[k]) + 1e-10 {
            gauge_ok = false;
            break;
        }
    }
    study.check(
        "per-step distances obey the gauge bound",
        gauge_ok,
        format!("{} steps checked", execution.trace.steps()),
    );

    let closed0 = closed_form_constants(&ClosedFormCase::Tangent { i: 0 })?;
    let modulus_hat = execution.constant("modulus_R0");
    study.check(
        "outermost-annulus modulus estimate within 2% of closed form",
        modulus_hat.map(|m| rel_err(m, closed0["modulus"]) <= 0.02) == Some(true),
        format!("modulus_hat = {}", fmt_opt(modulus_hat)),
    );

    study.row("modulus_R0", Some(closed0["modulus"]), modulus_hat, None);
    study.row(
        "c_0",
        Some(closed0["c"]),
        None,
        per_annulus.get(&0).copied(),
    );
    study.row(
        "c_6",
        Some(closed_form_constants(&ClosedFormCase::Tangent { i: 6 })?["c"]),
        None,
        per_annulus.get(&6).copied(),
    );
    study.finish(&execution.config)
}

fn fb_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    let a_diag = param_vec_f64(&params, "a_diag", &[2.0, 1.0])?;
    let weight = param_f64(&params, "weight", 0.1)?;
    let t = param_f64(&params, "t", 0.1)?;
    params.insert("a_diag".into(), serde_json::json!(a_diag));
    params.insert("weight".into(), serde_json::json!(weight));
    params.insert("t".into(), serde_json::json!(t));
    ensure_known(&params, &["a_diag", "weight", "t"])?;

    let algorithm = expand_algorithm("fb_soft_threshold", &params)?;
    let dim = a_diag.len();
    let x0 = Point::new((0..dim).map(|i| 1.5 - 0.3 * i as f64).collect());
    // Preliminary run to locate the fixed point; with a vanishing linear
    // term the soft threshold reaches it exactly.
    let prelim = picard(
        &algorithm,
        &x0,
        &StopRule {
            residual_tol: 1e-13,
            ..StopRule::default()
        },
        &SelectionPolicy::LexicographicMin,
        None,
    )?;
    let x_inf = prelim.final_point().clone();
    let radius = x0.dist(&x_inf).max(1.0);

    let analysis = AnalysisSpec {
        reference: Some(ZeroSet::points(vec![x_inf.clone()])),
        annuli: Some(AnnuliSpec {
            delta_bar: None,
            gamma: 0.5,
        }),
        estimators: vec![
            EstimatorSpec::ViolationProfile {
                name: "epsilon_profile".into(),
                y: x_inf.clone(),
                region: SampleRegion::ball(x_inf.clone(), radius, 400, seed ^ 0x31u64),
                alpha_grid: None,
            },
            EstimatorSpec::Subregularity {
                name: "kappa".into(),
                zero_set: ZeroSet::points(vec![x_inf.clone()]),
                region: SampleRegion::ball(x_inf.clone(), radius, 400, seed ^ 0x32u64),
            },
        ],
    };
    let stop = StopRule {
        residual_tol: 1e-13,
        ..StopRule::default()
    };
    let config = base_config("fb_soft_threshold", params, x0, stop, seed, Some(analysis));
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("fb_soft_threshold", out, execution.meta.clone());

    let a = Matrix::diagonal(&a_diag);
    let eigs = a.symmetric_eigenvalues()?;
    let lambda_min = eigs[0];
    let lambda_max = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let beta = if lambda_min > 0.0 {
        lambda_min / (lambda_max * lambda_max)
    } else {
        2.0 * t
    };
    let closed = closed_form_constants(&ClosedFormCase::FbQuadratic {
        a,
        b: Point::zeros(dim),
        t,
        beta: beta.max(t * 2.0),
    })?;

    let alpha = closed["alpha"];
    let eps_hat = execution
        .estimate("epsilon_profile")
        .and_then(|e| e.profile.as_ref())
        .and_then(|p| p.epsilon_at(alpha))
        .map(|e| e.max(0.0))
        .unwrap_or(0.0);
    let kappa_hat = execution.constant("kappa").unwrap_or(f64::INFINITY);
    let est_cert = certify_linear_rate(eps_hat, alpha, kappa_hat)?
        .with_provenance("estimated violation and modulus")
        .with_validity(SampleRegion::ball(x_inf.clone(), radius, 1, seed));

    let fixed_residual = {
        let images = apply(
            &execution.algorithm,
            &x_inf,
            &SelectionPolicy::LexicographicMin,
        )?;
        images.points[0].dist(&x_inf)
    };
    study.check(
        "fixed point residual at most 1e-12",
        fixed_residual <= 1e-12,
        format!("residual {}", fmt_sig(fixed_residual)),
    );
    study.check(
        "run converges",
        execution.trace.outcome == Outcome::Converged,
        format!("{} steps", execution.trace.steps()),
    );
    let max_q = execution.trace.max_q_from(0);
    study.check(
        "linear convergence observed (max q below 1)",
        max_q.map(|q| q < 1.0) == Some(true),
        format!("max q = {}", fmt_opt(max_q)),
    );
    match est_cert.c {
        Some(c) => study.check(
            "max q within certified c + 0.02",
            max_q.map(|q| q <= c + 0.02) == Some(true),
            format!("max q = {} vs c = {}", fmt_opt(max_q), fmt_sig(c)),
        ),
        None => study.check(
            "certificate issued from estimated constants",
            false,
            "no certificate".into(),
        ),
    }
    study.check(
        "measured violation at theoretical alpha within closed form + 0.01",
        eps_hat <= closed["epsilon"].max(0.0) + 0.01,
        format!(
            "measured {} vs closed {}",
            fmt_sig(eps_hat),
            fmt_sig(closed["epsilon"])
        ),
    );

    study.row("L", Some(closed["L"]), None, None);
    study.row("tau", Some(closed["tau"]), None, None);
    study.row(
        "epsilon",
        Some(closed["epsilon"].max(0.0)),
        Some(eps_hat),
        None,
    );
    study.row("alpha", Some(alpha), None, None);
    study.row("kappa", None, Some(kappa_hat), None);
    study.row("c", None, est_cert.c, max_q);
    if let Some(th) = closed.get("step_threshold") {
        study.row("step_threshold", Some(*th), None, None);
    }
    study.certificate("estimated", est_cert);
    study.finish(&execution.config)
}

fn dr_vs_raar_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    let gap = param_f64(&params, "gap", 1.0)?;
    let beta = param_f64(&params, "beta", 0.7)?;
    let n = param_u64(&params, "n", 4)? as usize;
    let signal_seed = param_u64(&params, "signal_seed", 42)?;
    let perturbation = param_f64(&params, "perturbation", 0.1)?;
    params.insert("gap".into(), serde_json::json!(gap));
    params.insert("beta".into(), serde_json::json!(beta));
    params.insert("n".into(), serde_json::json!(n));
    params.insert("signal_seed".into(), serde_json::json!(signal_seed));
    params.insert("perturbation".into(), serde_json::json!(perturbation));

    // Primary run: Douglas-Rachford on the inconsistent pair of lines,
    // stopped by a tight divergence radius.
    let stop = StopRule {
        residual_tol: 1e-12,
        max_iter: 10_000,
        divergence_radius: 1e3,
    };
    let config = base_config("dr_vs_raar", params, point![0.3, 0.2], stop, seed, None);
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("dr_vs_raar", out, execution.meta.clone());

    study.check(
        "Douglas-Rachford on parallel lines flagged diverged within 1e4 iterations",
        execution.trace.outcome == Outcome::Diverged && execution.trace.steps() <= 10_000,
        format!("{} steps", execution.trace.steps()),
    );
    // Per-step translation has closed form: the gap itself.
    let observed_step = execution.trace.residuals[..execution.trace.steps().min(100)]
        .iter()
        .fold(0.0f64, |m, r| m.max(*r));
    study.row("dr_step_translation", Some(gap), None, Some(observed_step));
    study.check(
        "per-step translation equals the gap",
        (observed_step - gap).abs() <= 1e-10,
        format!("observed {}", fmt_sig(observed_step)),
    );

    // RAAR on the same pair stays bounded and converges.
    let (a, b) = parallel_lines(gap);
    let raar_lines = raar(a, b, beta)?;
    let lines_trace = picard(
        &raar_lines,
        &point![0.3, 0.2],
        &StopRule {
            residual_tol: 1e-12,
            max_iter: 10_000,
            divergence_radius: 1e8,
        },
        &SelectionPolicy::LexicographicMin,
        None,
    )?;
    write_csv(
        &out.join("trace_raar_lines.csv"),
        &execution.meta,
        &trace_csv(&lines_trace),
    )?;
    let fixed_x2 = (1.0 - 2.0 * beta) * gap / (1.0 - beta);
    let observed_x2 = lines_trace.final_point().coords()[1];
    study.check(
        "RAAR on parallel lines reaches residual 1e-8",
        lines_trace.outcome == Outcome::Converged && lines_trace.final_residual() <= 1e-8,
        format!("final residual {}", fmt_sig(lines_trace.final_residual())),
    );
    study.check(
        "RAAR fixed point matches closed form",
        (observed_x2 - fixed_x2).abs() <= 1e-8,
        format!("x2 = {}", fmt_sig(observed_x2)),
    );
    study.row("raar_fixed_x2", Some(fixed_x2), None, Some(observed_x2));

    // RAAR on the inconsistent toy phase-retrieval instance.
    let (magnitude, support, planted) = phase_instance(n, signal_seed, perturbation)?;
    let raar_phase = raar(magnitude, support, beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(signal_seed ^ 0xabcd);
    let offset: Vec<f64> = (0..planted.dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let offset = Point::new(offset);
    let x0_phase = planted.axpy(0.3 / offset.norm(), &offset);
    let phase_trace = picard(
        &raar_phase,
        &x0_phase,
        &StopRule {
            residual_tol: 1e-9,
            max_iter: 200_000,
            divergence_radius: 1e3,
        },
        &SelectionPolicy::LexicographicMin,
        None,
    )?;
    write_csv(
        &out.join("trace_raar_phase.csv"),
        &execution.meta,
        &trace_csv(&phase_trace),
    )?;
    let max_norm = phase_trace
        .iterates
        .iter()
        .map(|x| x.norm())
        .fold(0.0f64, f64::max);
    study.check(
        "RAAR on the inconsistent toy phase instance stays bounded",
        phase_trace.outcome != Outcome::Diverged && max_norm < 1e3,
        format!("max iterate norm {}", fmt_sig(max_norm)),
    );
    study.check(
        "RAAR on the inconsistent toy phase instance reaches residual 1e-8",
        phase_trace.final_residual() <= 1e-8,
        format!(
            "final residual {} after {} steps",
            fmt_sig(phase_trace.final_residual()),
            phase_trace.steps()
        ),
    );
    study.finish(&execution.config)
}

fn phase_retrieval_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    let n = param_u64(&params, "n", 4)? as usize;
    let consistent = param_bool(&params, "consistent", true)?;
    let beta = param_f64(&params, "beta", 0.7)?;
    let signal_seed = param_u64(&params, "signal_seed", 42)?;
    let perturbation = param_f64(&params, "perturbation", 0.1)?;
    params.insert("n".into(), serde_json::json!(n));
    params.insert("consistent".into(), serde_json::json!(consistent));
    params.insert("beta".into(), serde_json::json!(beta));
    params.insert("signal_seed".into(), serde_json::json!(signal_seed));
    params.insert("perturbation".into(), serde_json::json!(perturbation));

    let effective = if consistent { 0.0 } else { perturbation };
    let (magnitude, support, planted) = phase_instance(n, signal_seed, effective)?;
    let mut rng = ChaCha8Rng::seed_from_u64(signal_seed ^ 0xabcd);
    let offset: Vec<f64> = (0..planted.dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let offset = Point::new(offset);
    let x0 = planted.axpy(0.3 / offset.norm(), &offset);

    let stop = StopRule {
        residual_tol: if consistent { 1e-12 } else { 1e-9 },
        max_iter: 200_000,
        divergence_radius: 1e3,
    };
    let config = base_config("phase_retrieval_toy", params, x0, stop, seed, None);
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("phase_retrieval_toy", out, execution.meta.clone());

    let x_inf = execution.trace.final_point();
    let d_magnitude = distance(&magnitude, x_inf)?;
    let d_support = distance(&support, x_inf)?;
    let max_norm = execution
        .trace
        .iterates
        .iter()
        .map(|x| x.norm())
        .fold(0.0f64, f64::max);

    if consistent {
        study.check(
            "cyclic projections converge",
            execution.trace.outcome == Outcome::Converged,
            format!("{} steps", execution.trace.steps()),
        );
        study.check(
            "limit satisfies the modulus constraint to 1e-8",
            d_magnitude <= 1e-8,
            format!("distance {}", fmt_sig(d_magnitude)),
        );
        study.check(
            "limit satisfies the support constraint to 1e-8",
            d_support <= 1e-8,
            format!("distance {}", fmt_sig(d_support)),
        );
    } else {
        study.check(
            "RAAR stays bounded on the inconsistent instance",
            execution.trace.outcome != Outcome::Diverged && max_norm < 1e3,
            format!("max iterate norm {}", fmt_sig(max_norm)),
        );
        study.check(
            "RAAR reaches residual 1e-8",
            execution.trace.final_residual() <= 1e-8,
            format!(
                "final residual {}",
                fmt_sig(execution.trace.final_residual())
            ),
        );
    }
    study.row("dist_to_magnitude_set", None, None, Some(d_magnitude));
    study.row("dist_to_support_set", None, None, Some(d_support));
    study.row(
        "final_residual",
        None,
        None,
        Some(execution.trace.final_residual()),
    );
    study.finish(&execution.config)
}

fn inhomogeneous_study(mut params: BTreeMap<String, Value>, out: &Path) -> Result<CaseOutcome> {
    let seed = take_seed(&mut params, 42)?;
    ensure_known(&params, &[])?;
    let orthant = SetSpec::orthant_complement(2);
    let limit = point![0.0, 3.0];
    let analysis = AnalysisSpec {
        reference: Some(ZeroSet::points(vec![limit.clone()])),
        annuli: None,
        estimators: vec![],
    };
    let config = base_config(
        "inhomogeneous_fixed_points",
        params,
        point![1.0, 1.0],
        StopRule::default(),
        seed,
        Some(analysis),
    );
    let execution = execute(&config, Some(out))?;
    let mut study = Study::new("inhomogeneous_fixed_points", out, execution.meta.clone());

    // The orthant-complement projector splits at (1,1).
    let ties = project(&orthant, &point![1.0, 1.0])?;
    let tie_ok = ties.points.len() == 2
        && ties
            .points
            .iter()
            .any(|p| p.dist(&point![0.0, 1.0]) < 1e-12)
        && ties
            .points
            .iter()
            .any(|p| p.dist(&point![1.0, 0.0]) < 1e-12);
    study.check(
        "projector onto the orthant complement splits (1,1) into two branches",
        tie_ok,
        format!("{} branches", ties.points.len()),
    );
    let refl = reflect(&orthant, &point![1.0, 1.0])?;
    let refl_ok = refl.len() == 2
        && refl.iter().any(|p| p.dist(&point![-1.0, 1.0]) < 1e-12)
        && refl.iter().any(|p| p.dist(&point![1.0, -1.0]) < 1e-12);
    study.check(
        "reflector branches follow 2p - x",
        refl_ok,
        format!("{} branches", refl.len()),
    );

    // Branch enumeration through the composition; hand-computed images.
    let images = apply(
        &execution.algorithm,
        &point![1.0, 1.0],
        &SelectionPolicy::AllBranches { budget: 8 },
    )?;
    let expected = [point![0.8, 1.4], point![1.4, 0.2]];
    let branches_ok = images.points.len() == 2
        && expected
            .iter()
            .all(|e| images.points.iter().any(|p| p.dist(e) < 1e-12));
    study.check(
        "all-branches image of (1,1) is {(0.8,1.4), (1.4,0.2)}",
        branches_ok,
        format!("{} branches", images.points.len()),
    );
    for (i, e) in expected.iter().enumerate() {
        study.row(
            &format!("branch_{i}_x1"),
            Some(e.coords()[0]),
            None,
            images.points.get(i).map(|p| p.coords()[0]),
        );
        study.row(
            &format!("branch_{i}_x2"),
            Some(e.coords()[1]),
            None,
            images.points.get(i).map(|p| p.coords()[1]),
        );
    }

    study.check(
        "lexicographic run converges to the intersection",
        execution.trace.outcome == Outcome::Converged
            && execution.trace.final_point().dist(&limit) <= 1e-6,
        format!(
            "final point distance {}",
            fmt_sig(execution.trace.final_point().dist(&limit))
        ),
    );
    let trace2 = picard(
        &execution.algorithm,
        &config.run.x0,
        &config.run.stop,
        &config.run.policy,
        None,
    )?;
    study.check(
        "re-running the study is bitwise deterministic",
        trace2.iterates == execution.trace.iterates,
        format!("{} iterates compared", trace2.iterates.len()),
    );
    study.row(
        "limit_x1",
        Some(limit.coords()[0]),
        None,
        Some(execution.trace.final_point().coords()[0]),
    );
    study.row(
        "limit_x2",
        Some(limit.coords()[1]),
        None,
        Some(execution.trace.final_point().coords()[1]),
    );
    study.finish(&execution.config)
}

/// Runs the named case study into `out` and returns its check outcomes.
pub fn run_case_study(
    name: &str,
    params: BTreeMap<String, Value>,
    out: &Path,
) -> Result<CaseOutcome> {
    match name {
        "triangle" => triangle_study(params, out),
        "circles" => circles_study(params, out),
        "tangent" => tangent_study(params, out),
        "fb_soft_threshold" => fb_study(params, out),
        "dr_vs_raar" => dr_vs_raar_study(params, out),
        "phase_retrieval_toy" => phase_retrieval_study(params, out),
        "inhomogeneous_fixed_points" => inhomogeneous_study(params, out),
        other => Err(CliError::Config(format!(
            "unknown case study '{other}' (known: {})",
            CASE_NAMES.join(", ")
        ))),
    }
}
