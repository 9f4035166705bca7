//! Picard iteration with full tracing and annular rate analysis.
//!
//! A run records every iterate, the step residuals `dist(x^k, T x^k)`,
//! and, when a reference zero set `S` is supplied, the distances
//! `dist(x^k, S)` and the per-step contraction factors
//! `q_k = dist(x^{k+1}, S) / dist(x^k, S)`.  Sublinear convergence is
//! quantified by bucketing steps into annuli
//! `gamma^{i+1} delta_bar <= dist(x, S) < gamma^i delta_bar` and taking
//! the worst contraction factor per annulus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{Operator, SelectionPolicy};
use crate::point::Point;
use crate::regularity::{RateCertificate, SampleRegion, ZeroSet};

/// Stopping rule of a Picard run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopRule {
    pub residual_tol: f64,
    pub max_iter: usize,
    pub divergence_radius: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            residual_tol: 1e-12,
            max_iter: 100_000,
            divergence_radius: 1e8,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.residual_tol <= 0.0 {
            return Err(Error::InvalidParameter(
                "residual tolerance must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "iteration budget must be positive".into(),
            ));
        }
        if self.divergence_radius <= 0.0 {
            return Err(Error::InvalidParameter(
                "divergence radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "converged")]
    Converged,
    #[serde(rename = "max-iter")]
    MaxIter,
    #[serde(rename = "diverged")]
    Diverged,
    #[serde(rename = "continuum-degenerate")]
    ContinuumDegenerate,
}

/// Full record of a Picard run.
///
/// `residuals` has one entry per iterate; `q_factors` one per step (NaN
/// where the reference distance vanishes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub iterates: Vec<Point>,
    pub residuals: Vec<f64>,
    pub ref_distances: Option<Vec<f64>>,
    pub q_factors: Vec<f64>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn final_point(&self) -> &Point {
        self.iterates
            .last()
            .expect("trace has at least one iterate")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("trace has residuals")
    }

    /// Number of operator steps taken.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    /// Largest finite q-factor, optionally starting from a given step.
    pub fn max_q_from(&self, first_step: usize) -> Option<f64> {
        self.q_factors
            .iter()
            .skip(first_step)
            .filter(|q| q.is_finite())
            .fold(None, |m, q| Some(m.map_or(*q, |m: f64| m.max(*q))))
    }
}

/// Runs `x^{k+1} ∈ T x^k` from `x0` until the residual drops below the
/// tolerance, the iteration budget is exhausted, the iterates leave the
/// divergence radius, or a continuum-degenerate projection is hit.
pub fn picard(
    op: &dyn Operator,
    x0: &Point,
    stop: &StopRule,
    policy: &SelectionPolicy,
    reference: Option<&ZeroSet>,
) -> Result<Trace> {
    stop.validate()?;
    x0.check_dim(op.ambient_dim())?;
    let mut iterates = vec![x0.clone()];
    let mut residuals: Vec<f64> = Vec::new();
    let mut ref_distances: Option<Vec<f64>> = match reference {
        Some(z) => Some(vec![z.distance(x0)?]),
        None => None,
    };
    let mut q_factors: Vec<f64> = Vec::new();
    let mut outcome = Outcome::MaxIter;

    let mut x = x0.clone();
    for k in 0..stop.max_iter {
        let images = op
            .apply_at(&x, policy, k as u64)
            .map_err(|e| e.at_iteration(k))?;
        // Under single-branch policies there is exactly one image; under
        // all-branches the step follows the lexicographic minimum.
        let next = images.points[0].clone();
        let residual = next.dist(&x);
        residuals.push(residual);
        if images.continuum {
            outcome = Outcome::ContinuumDegenerate;
            break;
        }
        if residual <= stop.residual_tol {
            outcome = Outcome::Converged;
            break;
        }
        if let (Some(dists), Some(z)) = (ref_distances.as_mut(), reference) {
            let d_next = z.distance(&next).map_err(|e| e.at_iteration(k))?;
            let d_prev = *dists.last().unwrap();
            q_factors.push(if d_prev > 1e-300 {
                d_next / d_prev
            } else {
                f64::NAN
            });
            dists.push(d_next);
        }
        iterates.push(next.clone());
        if next.norm() > stop.divergence_radius {
            outcome = Outcome::Diverged;
            break;
        }
        x = next;
    }
    if residuals.len() < iterates.len() {
        // Terminated by the iteration budget before evaluating the last
        // residual; measure it so lengths stay consistent.
        let images = op
            .apply_at(&x, policy, iterates.len() as u64)
            .map_err(|e| e.at_iteration(iterates.len()))?;
        residuals.push(images.points[0].dist(&x));
    }
    Ok(Trace {
        iterates,
        residuals,
        ref_distances,
        q_factors,
        outcome,
    })
}

/// Observed contraction on one annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRate {
    pub i: u32,
    pub c_hat: f64,
    pub count: usize,
}

/// Buckets the steps of a trace by the annulus
/// `gamma^{i+1} delta_bar <= dist(x^k, S) < gamma^i delta_bar` that
/// contains the step's starting distance, and reports the worst q-factor
/// per populated annulus.
pub fn annular_rate_analysis(
    trace: &Trace,
    delta_bar: f64,
    gamma: f64,
) -> Result<Vec<AnnulusRate>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "annulus ratio must lie in (0, 1), got {gamma}"
        )));
    }
    if delta_bar <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "annulus scale must be positive, got {delta_bar}"
        )));
    }
    let dists = trace
        .ref_distances
        .as_ref()
        .ok_or(Error::MissingReference)?;
    let mut buckets: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
    for (k, q) in trace.q_factors.iter().enumerate() {
        if !q.is_finite() {
            continue;
        }
        let d = dists[k];
        if d >= delta_bar || d <= 0.0 {
            continue;
        }
        let i = ((d / delta_bar).ln() / gamma.ln()).floor() as u32;
        let entry = buckets.entry(i).or_insert((f64::NEG_INFINITY, 0));
        entry.0 = entry.0.max(*q);
        entry.1 += 1;
    }
    Ok(buckets
        .into_iter()
        .map(|(i, (c_hat, count))| AnnulusRate { i, c_hat, count })
        .collect())
}

/// Comparison of an observed trace against a rate certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub pass: bool,
    pub certified_c: f64,
    pub observed_max_q: Option<f64>,
    pub slack: f64,
    pub first_iteration_in_validity: Option<usize>,
    pub final_residual: f64,
    pub outcome: Outcome,
}

/// Observed-vs-certified slack accepted by verdicts.
pub const VERDICT_SLACK: f64 = 0.02;

fn in_region(region: &SampleRegion, x: &Point) -> bool {
    let d = x.dist(&region.center);
    d >= region.inner_radius && d <= region.outer_radius
}

/// Checks whether the observed contraction factors inside the
/// certificate's validity region stay below `c + 0.02`.
pub fn verdict(trace: &Trace, cert: &RateCertificate) -> Result<VerdictReport> {
    let Some(c) = cert.c else {
        return Err(Error::InvalidParameter(
            "verdict requires a certificate with a rate".into(),
        ));
    };
    let mut first_in = None;
    let mut observed: Option<f64> = None;
    for (k, q) in trace.q_factors.iter().enumerate() {
        let inside = cert
            .validity
            .as_ref()
            .map(|r| in_region(r, &trace.iterates[k]))
            .unwrap_or(true);
        if !inside {
            continue;
        }
        if first_in.is_none() {
            first_in = Some(k);
        }
        if q.is_finite() {
            observed = Some(observed.map_or(*q, |m: f64| m.max(*q)));
        }
    }
    let pass = trace.outcome != Outcome::Diverged
        && observed.map(|m| m <= c + VERDICT_SLACK).unwrap_or(true);
    Ok(VerdictReport {
        pass,
        certified_c: c,
        observed_max_q: observed,
        slack: VERDICT_SLACK,
        first_iteration_in_validity: first_in,
        final_residual: trace.final_residual(),
        outcome: trace.outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{FunctionSpec, SetSpec};
    use crate::operators::{cyclic_projections, douglas_rachford, OperatorSpec};
    use crate::point;
    use crate::regularity::certify_linear_rate;

    fn lex() -> SelectionPolicy {
        SelectionPolicy::LexicographicMin
    }

    #[test]
    fn projector_converges_in_one_step() {
        let t = OperatorSpec::projector(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let trace = picard(&t, &point![3.0, 4.0], &StopRule::default(), &lex(), None).unwrap();
        assert_eq!(trace.outcome, Outcome::Converged);
        assert_eq!(trace.steps(), 1);
        assert!(trace.final_point().dist(&point![3.0, 0.0]) < 1e-14);
    }

    fn triangle_p0() -> OperatorSpec {
        let s3 = 3.0f64.sqrt();
        cyclic_projections(vec![
            SetSpec::hyperplane(point![0.0, 1.0], 0.0),
            SetSpec::hyperplane(point![-s3, 1.0], s3),
            SetSpec::hyperplane(point![s3, 1.0], s3),
        ])
        .unwrap()
    }

    #[test]
    fn triangle_converges_to_known_fixed_point() {
        let target = point![-1.0 / 3.0, 0.0];
        let reference = ZeroSet::points(vec![target.clone()]);
        let trace = picard(
            &triangle_p0(),
            &point![0.2, 0.3],
            &StopRule::default(),
            &lex(),
            Some(&reference),
        )
        .unwrap();
        assert_eq!(trace.outcome, Outcome::Converged);
        assert!(trace.final_point().dist(&target) < 1e-8);
        // Fejér-type behavior: distances to the fixed point never grow.
        let dists = trace.ref_distances.as_ref().unwrap();
        for w in dists.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn douglas_rachford_on_parallel_lines_diverges() {
        let f = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let g = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 1.0));
        let dr = douglas_rachford(f, g).unwrap();
        let stop = StopRule {
            divergence_radius: 1e3,
            max_iter: 10_000,
            ..StopRule::default()
        };
        let trace = picard(&dr, &point![0.3, 0.2], &stop, &lex(), None).unwrap();
        assert_eq!(trace.outcome, Outcome::Diverged);
        assert!(trace.steps() < 10_000);
    }

    #[test]
    fn continuum_degenerate_outcome() {
        let t = OperatorSpec::projector(SetSpec::sphere(point![0.0, 0.0], 1.0));
        let trace = picard(&t, &point![0.0, 0.0], &StopRule::default(), &lex(), None).unwrap();
        assert_eq!(trace.outcome, Outcome::ContinuumDegenerate);
    }

    #[test]
    fn traces_are_bitwise_deterministic() {
        let reference = ZeroSet::points(vec![point![-1.0 / 3.0, 0.0]]);
        let run = || {
            picard(
                &triangle_p0(),
                &point![0.7, -0.4],
                &StopRule::default(),
                &lex(),
                Some(&reference),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn annular_analysis_of_uniform_contraction() {
        // Synthetic linear trace with rate exactly 0.5.
        let mut iterates = Vec::new();
        let mut dists = Vec::new();
        let mut q = Vec::new();
        let mut d = 1.0;
        for k in 0..20 {
            iterates.push(point![d, 0.0]);
            dists.push(d);
            if k > 0 {
                q.push(0.5);
            }
            d *= 0.5;
        }
        let trace = Trace {
            residuals: vec![0.0; iterates.len()],
            iterates,
            ref_distances: Some(dists),
            q_factors: q,
            outcome: Outcome::Converged,
        };
        let rates = annular_rate_analysis(&trace, 1.0, 0.5).unwrap();
        assert!(!rates.is_empty());
        for r in rates {
            assert!((r.c_hat - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn annular_analysis_requires_reference() {
        let t = OperatorSpec::projector(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let trace = picard(&t, &point![3.0, 4.0], &StopRule::default(), &lex(), None).unwrap();
        assert!(matches!(
            annular_rate_analysis(&trace, 1.0, 0.5),
            Err(Error::MissingReference)
        ));
    }

    #[test]
    fn verdict_pass_and_fail() {
        let target = point![-1.0 / 3.0, 0.0];
        let reference = ZeroSet::points(vec![target.clone()]);
        let trace = picard(
            &triangle_p0(),
            &point![0.2, 0.3],
            &StopRule::default(),
            &lex(),
            Some(&reference),
        )
        .unwrap();
        let cert = certify_linear_rate(0.0, 0.75, 8.0 / 9.0).unwrap();
        let report = verdict(&trace, &cert).unwrap();
        assert!(report.pass);
        assert!(report.observed_max_q.unwrap() <= 37.0f64.sqrt() / 8.0 + 0.02);

        // A diverged run fails against any certificate.
        let f = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let g = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 1.0));
        let dr = douglas_rachford(f, g).unwrap();
        let stop = StopRule {
            divergence_radius: 1e3,
            max_iter: 10_000,
            ..StopRule::default()
        };
        let diverged = picard(&dr, &point![0.3, 0.2], &stop, &lex(), Some(&reference)).unwrap();
        let bad = verdict(&diverged, &cert).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.outcome, Outcome::Diverged);
    }
}
