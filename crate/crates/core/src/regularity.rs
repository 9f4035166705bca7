//! Empirical estimation of the constants that drive convergence rates,
//! and rate certification.
//!
//! An almost averaged map with violation `eps` and averaging constant
//! `alpha`, whose residual map is metrically subregular with modulus
//! `kappa`, contracts the distance to its fixed points by
//! `c = sqrt(1 + eps - (1 - alpha) / (alpha kappa^2))` per step; the rate
//! is certified when `kappa < sqrt((1 - alpha) / (eps alpha))`.  The
//! estimators here produce sup-estimates of `eps`, `kappa`, elemental
//! subregularity, subtransversality and the cyclic-projections coupling
//! constant `sigma` by deterministic sampling; sup-estimates are lower
//! bounds on the true constants, sharpened by re-sampling shrinking balls
//! around the running arg-max.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, Affine, SetSpec};
use crate::matrix::Matrix;
use crate::operators::{Operator, SelectionPolicy};
use crate::point::Point;
use crate::productspace::{
    lift_to_cycle, phi_zeta_residual, psi_distance, DifferenceVector, ProductPoint,
};
use crate::sampling::AnnulusSampler;

/// Pairs closer than this to the reference point are excluded from
/// violation ratios.
pub const PAIR_EXCLUSION: f64 = 1e-9;
/// Residuals smaller than this are excluded from modulus ratios.
pub const RESIDUAL_EXCLUSION: f64 = 1e-12;
/// Branch budget used inside estimators; the worst branch is taken.
pub const ESTIMATOR_BRANCH_BUDGET: usize = 16;
/// Refinement pass: rounds and per-round shrink factor.
const REFINE_ROUNDS: usize = 3;
const REFINE_SHRINK: f64 = 0.25;

/// An annular sampling region, optionally confined to an affine subspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub center: Point,
    pub inner_radius: f64,
    pub outer_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<Affine>,
    pub count: usize,
    pub seed: u64,
}

impl SampleRegion {
    pub fn ball(center: Point, radius: f64, count: usize, seed: u64) -> Self {
        SampleRegion {
            center,
            inner_radius: 0.0,
            outer_radius: radius,
            constraint: None,
            count,
            seed,
        }
    }

    pub fn annulus(center: Point, inner: f64, outer: f64, count: usize, seed: u64) -> Self {
        SampleRegion {
            center,
            inner_radius: inner,
            outer_radius: outer,
            constraint: None,
            count,
            seed,
        }
    }

    pub fn on(mut self, constraint: Affine) -> Self {
        self.constraint = Some(constraint);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_radius > self.inner_radius && self.inner_radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "region radii must satisfy 0 <= inner < outer, got [{}, {}]",
                self.inner_radius, self.outer_radius
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("region count must be >= 1".into()));
        }
        if let Some(aff) = &self.constraint {
            aff.validate()?;
            self.center.check_dim(aff.ambient_dim())?;
        }
        Ok(())
    }

    fn intrinsic_dim(&self) -> usize {
        self.constraint
            .as_ref()
            .map(|a| a.intrinsic_dim())
            .unwrap_or_else(|| self.center.dim())
    }

    /// Base point of the intrinsic coordinates (the center, projected onto
    /// the constraint when one is present).
    fn base_point(&self) -> Point {
        match &self.constraint {
            Some(aff) => aff.project(&self.center),
            None => self.center.clone(),
        }
    }

    fn to_ambient(&self, base: &Point, offset: &[f64]) -> Point {
        match &self.constraint {
            Some(aff) => {
                let mut p = base.clone();
                for (c, b) in offset.iter().zip(&aff.basis) {
                    p = p.axpy(*c, b);
                }
                p
            }
            None => {
                let coords: Vec<f64> = base
                    .coords()
                    .iter()
                    .zip(offset)
                    .map(|(a, b)| a + b)
                    .collect();
                Point::new(coords)
            }
        }
    }

    fn intrinsic_offset(&self, base: &Point, x: &Point) -> Vec<f64> {
        match &self.constraint {
            Some(aff) => {
                let d = x.sub(base);
                aff.basis.iter().map(|b| d.dot(b)).collect()
            }
            None => x.sub(base).into_coords(),
        }
    }
}

/// Report of one sup-estimate, with the data needed to reproduce and
/// refine it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub constant: f64,
    pub samples: usize,
    pub argmax_point: Point,
    pub seed: u64,
    pub region: SampleRegion,
}

/// Sup-estimation engine: a base pass over the region followed by
/// shrinking re-sampling around the running arg-max.  `eval` maps a raw
/// sample to per-component values plus the probe point to report, or
/// `None` when the sample is excluded.
fn sup_estimate<F>(
    region: &SampleRegion,
    components: usize,
    mut eval: F,
) -> Result<(Vec<f64>, Point, Point, usize)>
where
    F: FnMut(&Point) -> Result<Option<(Vec<f64>, Point)>>,
{
    region.validate()?;
    let base = region.base_point();
    let dim = region.intrinsic_dim();
    let mut maxima = vec![f64::NEG_INFINITY; components];
    let mut best: Option<(f64, Point, Point)> = None; // (overall max, raw, probe)
    let mut used = 0usize;

    let absorb = |x: &Point,
                  eval: &mut F,
                  maxima: &mut Vec<f64>,
                  best: &mut Option<(f64, Point, Point)>,
                  used: &mut usize|
     -> Result<()> {
        if let Some((values, probe)) = eval(x)? {
            *used += 1;
            let mut overall = f64::NEG_INFINITY;
            for (m, v) in maxima.iter_mut().zip(&values) {
                *m = m.max(*v);
                overall = overall.max(*v);
            }
            if best.as_ref().map(|(b, _, _)| overall > *b).unwrap_or(true) {
                *best = Some((overall, x.clone(), probe));
            }
        }
        Ok(())
    };

    let mut sampler =
        AnnulusSampler::new(dim, region.inner_radius, region.outer_radius, region.seed);
    for _ in 0..region.count {
        let x = region.to_ambient(&base, &sampler.next_offset());
        absorb(&x, &mut eval, &mut maxima, &mut best, &mut used)?;
    }

    // Refinement: shrink a ball around the arg-max, clipped to the region.
    let mut radius = region.outer_radius * REFINE_SHRINK;
    for round in 0..REFINE_ROUNDS {
        let Some((_, raw, _)) = best.clone() else {
            break;
        };
        let center_off = region.intrinsic_offset(&base, &raw);
        let mut ball = AnnulusSampler::new(dim, 0.0, radius, region.seed ^ (round as u64 + 1));
        let mut accepted = 0usize;
        let mut attempts = 0usize;
        while accepted < region.count && attempts < 10 * region.count {
            attempts += 1;
            let delta = ball.next_offset();
            let offset: Vec<f64> = center_off.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let r = offset.iter().map(|c| c * c).sum::<f64>().sqrt();
            if r < region.inner_radius || r > region.outer_radius {
                continue;
            }
            accepted += 1;
            let x = region.to_ambient(&base, &offset);
            absorb(&x, &mut eval, &mut maxima, &mut best, &mut used)?;
        }
        radius *= REFINE_SHRINK;
    }

    match best {
        Some((_, raw, probe)) => Ok((maxima, raw, probe, used)),
        None => Err(Error::EmptySample),
    }
}

/// One entry of a violation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub alpha: f64,
    pub epsilon: f64,
}

/// Measured almost-averaging violations `eps(alpha)` of an operator at a
/// reference point, over a grid of averaging constants.  The entries are
/// reported as measured; monotonicity in `alpha` is not assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationProfile {
    pub entries: Vec<ProfileEntry>,
    pub reference_point: Point,
    pub region: SampleRegion,
    pub samples: usize,
    pub argmax_point: Point,
}

impl ViolationProfile {
    pub fn epsilon_at(&self, alpha: f64) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| (e.alpha - alpha).abs() < 1e-12)
            .map(|e| e.epsilon)
    }

    /// CSV rows `alpha,epsilon`.
    pub fn to_csv(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from("alpha,epsilon\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", fmt(e.alpha), fmt(e.epsilon)));
        }
        out
    }
}

/// Default averaging-constant grid: `0.1, ..., 0.9` plus the operator's
/// theoretical constant when one is known.
pub fn default_alpha_grid(theoretical: Option<f64>) -> Vec<f64> {
    let mut grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    if let Some(a) = theoretical {
        if grid.iter().all(|g| (g - a).abs() > 1e-12) {
            grid.push(a);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid
}

/// Measures the violation profile of `op` at the reference point `y`:
/// for each `alpha`,
/// `eps(alpha) = sup [ |x+ - y+|^2 + (1-alpha)/alpha |(x-x+) - (y-y+)|^2 ]
///               / |x - y|^2 - 1`
/// over sampled `x` in the region and all branches, excluding samples
/// closer than `1e-9` to `y`.
pub fn estimate_violation_profile(
    op: &dyn Operator,
    y: &Point,
    region: &SampleRegion,
    alpha_grid: &[f64],
) -> Result<ViolationProfile> {
    if alpha_grid.is_empty() || alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::InvalidParameter(
            "averaging grid must lie in (0, 1)".into(),
        ));
    }
    y.check_dim(op.ambient_dim())?;
    let policy = SelectionPolicy::AllBranches {
        budget: ESTIMATOR_BRANCH_BUDGET,
    };
    let y_images = op.apply_at(y, &policy, 0)?.points;
    let (maxima, _, argmax, samples) = sup_estimate(region, alpha_grid.len(), |x| {
        let base = x.dist(y);
        if base < PAIR_EXCLUSION {
            return Ok(None);
        }
        let x_images = op.apply_at(x, &policy, 0)?.points;
        let mut values = vec![f64::NEG_INFINITY; alpha_grid.len()];
        for xp in &x_images {
            for yp in &y_images {
                let image = xp.dist(yp).powi(2);
                let transport = x.sub(xp).sub(&y.sub(yp)).norm().powi(2);
                for (v, alpha) in values.iter_mut().zip(alpha_grid) {
                    let ratio = (image + (1.0 - alpha) / alpha * transport) / base.powi(2) - 1.0;
                    *v = v.max(ratio);
                }
            }
        }
        Ok(Some((values, x.clone())))
    })?;
    Ok(ViolationProfile {
        entries: alpha_grid
            .iter()
            .zip(&maxima)
            .map(|(alpha, epsilon)| ProfileEntry {
                alpha: *alpha,
                epsilon: *epsilon,
            })
            .collect(),
        reference_point: y.clone(),
        region: region.clone(),
        samples,
        argmax_point: argmax,
    })
}

/// Zero set used for distances to fixed points: an explicit list of
/// converged limits or an analytic catalog set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZeroSet {
    Points { points: Vec<Point> },
    Set { set: SetSpec },
}

impl ZeroSet {
    pub fn points(points: Vec<Point>) -> Self {
        ZeroSet::Points { points }
    }

    pub fn set(set: SetSpec) -> Self {
        ZeroSet::Set { set }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ZeroSet::Points { points } => {
                if points.is_empty() {
                    Err(Error::DegenerateZeroSet)
                } else {
                    Ok(())
                }
            }
            ZeroSet::Set { set } => set.validate(),
        }
    }

    pub fn distance(&self, x: &Point) -> Result<f64> {
        match self {
            ZeroSet::Points { points } => {
                if points.is_empty() {
                    return Err(Error::DegenerateZeroSet);
                }
                Ok(points
                    .iter()
                    .map(|p| p.dist(x))
                    .fold(f64::INFINITY, f64::min))
            }
            ZeroSet::Set { set } => crate::geometry::distance(set, x),
        }
    }
}

/// Estimates the modulus of metric subregularity of `T - Id` for zero:
/// `kappa = sup dist(x, zero_set) / dist(0, Tx - x)` over the region,
/// excluding samples with residual below `1e-12`.  This is the smallest
/// linear-gauge constant consistent with the sample.
pub fn estimate_subregularity(
    op: &dyn Operator,
    zero_set: &ZeroSet,
    region: &SampleRegion,
) -> Result<EstimatorReport> {
    zero_set.validate()?;
    // Restrict an explicit zero set to the sampling constraint.
    let restricted: ZeroSet = match (zero_set, &region.constraint) {
        (ZeroSet::Points { points }, Some(aff)) => {
            let kept: Vec<Point> = points
                .iter()
                .filter(|p| aff.contains(p, 1e-8))
                .cloned()
                .collect();
            if kept.is_empty() {
                return Err(Error::DegenerateZeroSet);
            }
            ZeroSet::Points { points: kept }
        }
        _ => zero_set.clone(),
    };
    let policy = SelectionPolicy::AllBranches {
        budget: ESTIMATOR_BRANCH_BUDGET,
    };
    let (maxima, _, argmax, samples) = sup_estimate(region, 1, |x| {
        let images = op.apply_at(x, &policy, 0)?.points;
        let residual = images
            .iter()
            .map(|p| p.dist(x))
            .fold(f64::INFINITY, f64::min);
        if residual < RESIDUAL_EXCLUSION {
            return Ok(None);
        }
        let value = restricted.distance(x)? / residual;
        Ok(Some((vec![value], x.clone())))
    })?;
    Ok(EstimatorReport {
        constant: maxima[0],
        samples,
        argmax_point: argmax,
        seed: region.seed,
        region: region.clone(),
    })
}

/// Estimates the elemental-subregularity constant of a set at `xbar` for
/// the proximal-normal pair `(y, v)`:
/// `eps = sup <v - (x' - x+), x+ - y> / (|v - (x' - x+)| |x+ - y|)`
/// clamped to `[0, 1]`, over sampled `x'` and projection branches `x+`.
///
/// Samples are drawn in the region and confined to the region's affine
/// constraint when one is given; otherwise they are mapped onto the set
/// itself, which is the domain on which the underlying inequality is
/// quantified for elementally regular sets.
pub fn estimate_elemental_subregularity(
    set: &SetSpec,
    xbar: &Point,
    pair: (&Point, &Point),
    region: &SampleRegion,
) -> Result<EstimatorReport> {
    let (y, v) = pair;
    xbar.check_dim(set.ambient_dim())?;
    y.check_dim(set.ambient_dim())?;
    v.check_dim(set.ambient_dim())?;
    // Proximal-normal membership: y must be a nearest point of y + v.
    let back = project(set, &y.add(v))?;
    let membership = back
        .points
        .iter()
        .map(|p| p.dist(y))
        .fold(f64::INFINITY, f64::min);
    if membership > 1e-9 {
        return Err(Error::NotANormalPair {
            residual: membership,
        });
    }
    let on_set = region.constraint.is_none();
    let (maxima, _, argmax, samples) = sup_estimate(region, 1, |raw| {
        let mut best: Option<(f64, Point)> = None;
        let candidates: Vec<Point> = if on_set {
            project(set, raw)?.points
        } else {
            vec![raw.clone()]
        };
        for xp_query in candidates {
            for x_plus in project(set, &xp_query)?.points {
                let lhs = v.sub(&xp_query.sub(&x_plus));
                let rhs = x_plus.sub(y);
                let den = lhs.norm() * rhs.norm();
                if den < RESIDUAL_EXCLUSION {
                    continue;
                }
                let value = (lhs.dot(&rhs) / den).clamp(0.0, 1.0);
                if best.as_ref().map(|(b, _)| value > *b).unwrap_or(true) {
                    best = Some((value, xp_query.clone()));
                }
            }
        }
        Ok(best.map(|(value, probe)| (vec![value], probe)))
    })?;
    Ok(EstimatorReport {
        constant: maxima[0],
        samples,
        argmax_point: argmax,
        seed: region.seed,
        region: region.clone(),
    })
}

fn flatten_points(points: &[ProductPoint]) -> Vec<Point> {
    points.iter().map(|p| p.flatten()).collect()
}

/// Estimates the subtransversality constant of a collection of sets at a
/// cycle `xbar` with difference vector `zeta`:
/// `kappa = sup dist(x, Psi^{-1}(zeta) ∩ Lambda) / dist(zeta, Psi(x))`
/// over the region intersected with `Lambda`.
///
/// The inverse image is supplied analytically by case studies; when
/// absent it is approximated by the cycles enumerated at `xbar_1`.
pub fn estimate_subtransversality(
    sets: &[SetSpec],
    xbar: &ProductPoint,
    zeta: &DifferenceVector,
    region: &SampleRegion,
    lambda: &Affine,
    inverse: Option<&[ProductPoint]>,
) -> Result<EstimatorReport> {
    let zeta_pp = zeta.as_product_point();
    let precheck = psi_distance(sets, xbar, &zeta_pp)?;
    if precheck > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "zeta is not an alignment value at xbar (residual {precheck:.3e})"
        )));
    }
    let inverse_flat: Vec<Point> = match inverse {
        Some(points) if !points.is_empty() => flatten_points(points),
        _ => {
            let budget = SelectionPolicy::AllBranches {
                budget: ESTIMATOR_BRANCH_BUDGET,
            };
            let cycles = lift_to_cycle(sets, &xbar.blocks[0], &budget)?;
            let matching: Vec<ProductPoint> = cycles
                .into_iter()
                .filter(|z| {
                    DifferenceVector::from_cycle(z)
                        .as_product_point()
                        .dist(&zeta_pp)
                        <= 1e-8
                })
                .collect();
            if matching.is_empty() {
                return Err(Error::InverseSetUnavailable);
            }
            flatten_points(&matching)
        }
    };
    let mut region = region.clone();
    region.constraint = Some(lambda.clone());
    let m = sets.len();
    let (maxima, _, argmax, samples) = sup_estimate(&region, 1, |x| {
        let xp = ProductPoint::unflatten(x, m);
        let den = psi_distance(sets, &xp, &zeta_pp)?;
        if den < RESIDUAL_EXCLUSION {
            return Ok(None);
        }
        let num = inverse_flat
            .iter()
            .map(|p| p.dist(x))
            .fold(f64::INFINITY, f64::min);
        Ok(Some((vec![num / den], x.clone())))
    })?;
    Ok(EstimatorReport {
        constant: maxima[0],
        samples,
        argmax_point: argmax,
        seed: region.seed,
        region,
    })
}

/// Estimates the coupling constant `sigma` of cyclic projections:
/// `sigma = sup dist(zeta, Psi(x)) / dist(0, Phi_zeta(x))` over samples of
/// `Lambda` shifted diagonally so that the first block lies in the first
/// set, excluding near-fixed points.
pub fn estimate_sigma(
    sets: &[SetSpec],
    zeta: &DifferenceVector,
    region: &SampleRegion,
    lambda: &Affine,
) -> Result<EstimatorReport> {
    let zeta_pp = zeta.as_product_point();
    let mut region = region.clone();
    region.constraint = Some(lambda.clone());
    let m = sets.len();
    let (maxima, _, argmax, samples) = sup_estimate(&region, 1, |x| {
        let xp = ProductPoint::unflatten(x, m);
        // Diagonal shift onto {x_1 in O_1}; diagonal moves stay in W(zeta).
        let x1_proj = project(&sets[0], &xp.blocks[0])?;
        let mut branch_points = x1_proj.points;
        branch_points.sort_by(|a, b| a.lex_cmp(b));
        let shift = branch_points[0].sub(&xp.blocks[0]);
        let shifted = ProductPoint::new(xp.blocks.iter().map(|b| b.add(&shift)).collect());
        let den = phi_zeta_residual(sets, zeta, &shifted)?;
        if den < RESIDUAL_EXCLUSION {
            return Ok(None);
        }
        let num = psi_distance(sets, &shifted, &zeta_pp)?;
        Ok(Some((vec![num / den], shifted.flatten())))
    })?;
    Ok(EstimatorReport {
        constant: maxima[0],
        samples,
        argmax_point: argmax,
        seed: region.seed,
        region,
    })
}

/// How a certificate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateMode {
    #[serde(rename = "certified-linear")]
    CertifiedLinear,
    #[serde(rename = "no-certificate")]
    NoCertificate,
    #[serde(rename = "closed-form")]
    ClosedForm,
}

/// A convergence-rate certificate `(eps, alpha, kappa, c)` with its
/// provenance and validity region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub epsilon: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub c: Option<f64>,
    pub mode: CertificateMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity: Option<SampleRegion>,
    pub provenance: String,
}

impl RateCertificate {
    pub fn with_validity(mut self, region: SampleRegion) -> Self {
        self.validity = Some(region);
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Marks a certificate whose constants come from closed forms rather
    /// than estimation.
    pub fn as_closed_form(mut self) -> Self {
        if self.mode == CertificateMode::CertifiedLinear {
            self.mode = CertificateMode::ClosedForm;
        }
        self
    }
}

/// Certifies a linear rate from the triple `(eps, alpha, kappa)`.
///
/// When `eps = 0` or `kappa < sqrt((1-alpha)/(eps alpha))` the rate
/// `c = sqrt(1 + eps - (1-alpha)/(alpha kappa^2))` is below one and the
/// certificate is issued (clamped to `c = 0` when the radicand is
/// negative, meaning one-step convergence); otherwise no certificate.
pub fn certify_linear_rate(epsilon: f64, alpha: f64, kappa: f64) -> Result<RateCertificate> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "violation must be a nonnegative real, got {epsilon}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "averaging constant must lie in (0, 1), got {alpha}"
        )));
    }
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "modulus must be a positive real, got {kappa}"
        )));
    }
    let certified = epsilon == 0.0 || kappa < ((1.0 - alpha) / (epsilon * alpha)).sqrt();
    if certified {
        let radicand = 1.0 + epsilon - (1.0 - alpha) / (alpha * kappa * kappa);
        Ok(RateCertificate {
            epsilon,
            alpha,
            kappa,
            c: Some(radicand.max(0.0).sqrt()),
            mode: CertificateMode::CertifiedLinear,
            validity: None,
            provenance: String::new(),
        })
    } else {
        Ok(RateCertificate {
            epsilon,
            alpha,
            kappa,
            c: None,
            mode: CertificateMode::NoCertificate,
            validity: None,
            provenance: String::new(),
        })
    }
}

/// Case selector for [`closed_form_constants`].
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormCase {
    /// Three lines forming an equilateral triangle with no common point.
    Triangle,
    /// Two non-intersecting circles, parameterized by `r > 0`.
    Circles { r: f64 },
    /// A line tangent to the unit circle; constants of the `i`-th annulus.
    Tangent { i: u32 },
    /// Forward-backward on a quadratic `x'Ax + b'x`, step `t` in
    /// `(0, beta)`.
    FbQuadratic {
        a: Matrix,
        b: Point,
        t: f64,
        beta: f64,
    },
}

/// Gauge `f(t) = t (1 - 1/sqrt(t^2 + 1))`: the step length of alternating
/// projections on the tangent line-circle pair at distance `t`.
pub fn tangent_gauge_f(t: f64) -> f64 {
    t * (1.0 - 1.0 / (t * t + 1.0).sqrt())
}

/// Gauge `g(t) = sqrt(t^2 - f(t)^2 / 2)` bounding the per-step distance
/// decrease in the tangent case.
pub fn tangent_gauge_g(t: f64) -> f64 {
    (t * t - 0.5 * tangent_gauge_f(t).powi(2)).sqrt()
}

/// Closed-form constants of the worked cases, keyed by name.
pub fn closed_form_constants(case: &ClosedFormCase) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    match case {
        ClosedFormCase::Triangle => {
            let kappa = 2.0f64.sqrt();
            let sigma = 4.0 * 2.0f64.sqrt() / 9.0;
            out.insert("kappa".into(), kappa);
            out.insert("sigma".into(), sigma);
            out.insert("kappa_bar".into(), kappa * sigma);
            out.insert("alpha".into(), 0.75);
            out.insert("c".into(), 37.0f64.sqrt() / 8.0);
        }
        ClosedFormCase::Circles { r } => {
            if *r <= 0.0 || !r.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "circle parameter must be positive, got {r}"
                )));
            }
            let q = 2.0 * r * r + 6.0 * r + 9.0;
            let p = 4.0 * r * r + 12.0 * r + 13.0;
            let kappa = 3.0 * (2.0 * r + 3.0) / q.sqrt();
            // Two routes to the coupling constant are reported.  `sigma`
            // (and the products `kappa_bar`, `c_bound`) follow the
            // classical bound chain; `sigma_derived = sqrt(q)/(2r+1)`
            // comes from linearizing the two projectors on the slice with
            // the first block on the unit circle, and is what the
            // sampling estimator converges to.  The derived product
            // `kappa * sigma_derived = 3(2r+3)/(2r+1)` equals the
            // directly measured modulus of the shifted operator.
            let sigma = 2.0f64.sqrt() * q.sqrt() * (2.0 * r + 3.0) / (2.0 * p.sqrt() * (r + 2.0));
            let kappa_bar =
                3.0 * 2.0f64.sqrt() * (2.0 * r + 3.0).powi(2) / (2.0 * p.sqrt() * (r + 2.0));
            let c_bound = (1.0 - p * (r + 2.0).powi(2) / (9.0 * (2.0 * r + 3.0).powi(4))).sqrt();
            let sigma_derived = q.sqrt() / (2.0 * r + 1.0);
            let kappa_bar_derived = 3.0 * (2.0 * r + 3.0) / (2.0 * r + 1.0);
            out.insert("kappa".into(), kappa);
            out.insert("sigma".into(), sigma);
            out.insert("kappa_bar".into(), kappa_bar);
            out.insert("sigma_derived".into(), sigma_derived);
            out.insert("kappa_bar_derived".into(), kappa_bar_derived);
            out.insert("alpha".into(), 2.0 / 3.0);
            out.insert("c_bound".into(), c_bound);
        }
        ClosedFormCase::Tangent { i } => {
            let scale = 2.0f64.powi(-2 * (*i as i32 + 1));
            let inf_ratio = 1.0 - 1.0 / (scale + 1.0).sqrt();
            out.insert("inf_ratio".into(), inf_ratio);
            out.insert("modulus".into(), 1.0 / inf_ratio);
            out.insert("c".into(), (1.0 - inf_ratio * inf_ratio / 2.0).sqrt());
        }
        ClosedFormCase::FbQuadratic { a, b: _, t, beta } => {
            if !(*t > 0.0 && t < beta) {
                return Err(Error::InvalidParameter(format!(
                    "step must satisfy 0 < t < beta, got t = {t}, beta = {beta}"
                )));
            }
            let eigs = a.symmetric_eigenvalues()?;
            let lambda_min = eigs[0];
            let lambda_max_abs = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let big_l = 2.0 * lambda_max_abs;
            let tau = -2.0 * lambda_min; // hypomonotonicity violation of the gradient
            let epsilon = t * (2.0 * tau + beta * big_l * big_l);
            let alpha0 = t / beta;
            let alpha = if alpha0 <= 0.5 {
                2.0 / 3.0
            } else {
                2.0 * alpha0 / (alpha0 + 1.0)
            };
            out.insert("L".into(), big_l);
            out.insert("tau".into(), tau);
            out.insert("epsilon".into(), epsilon);
            out.insert("alpha0".into(), alpha0);
            out.insert("alpha".into(), alpha);
            if lambda_min > 0.0 {
                // Step threshold for a pointwise averaged gradient step.
                out.insert(
                    "step_threshold".into(),
                    2.0 * (2.0 * lambda_min) / (big_l * big_l),
                );
            }
        }
    }
    Ok(out)
}
