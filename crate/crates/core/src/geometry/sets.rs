//! The set catalog and its nearest-point maps.
//!
//! Every kind has a total analytic projector.  Projections are exact up to
//! rounding; finite ties (the cross, the orthant complement, finite point
//! sets) are enumerated exhaustively, and the documented singular queries
//! (center of a sphere, vanishing Fourier components) return a
//! deterministic representative flagged as `Continuum`.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::point::Point;

/// Membership residual accepted for "lies in the set" checks.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Relative tolerance for detecting equal-distance ties.
pub const TIE_TOL: f64 = 1e-10;
/// Orthonormality tolerance for affine bases.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// An affine subspace given by a base point and an orthonormal basis of
/// directions.  Also used as the sampling constraint of annular regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub point: Point,
    pub basis: Vec<Point>,
}

impl Affine {
    pub fn new(point: Point, basis: Vec<Point>) -> Self {
        Affine { point, basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.point.dim()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.basis {
            b.check_dim(self.point.dim())?;
        }
        for (i, bi) in self.basis.iter().enumerate() {
            for (j, bj) in self.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (bi.dot(bj) - want).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "affine basis not orthonormal: <b{i}, b{j}> = {:.3e}",
                        bi.dot(bj)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, x: &Point) -> Point {
        let delta = x.sub(&self.point);
        let mut p = self.point.clone();
        for b in &self.basis {
            p = p.axpy(delta.dot(b), b);
        }
        p
    }

    /// Point with the given intrinsic coordinates.
    pub fn lift(&self, coords: &[f64]) -> Point {
        assert_eq!(coords.len(), self.basis.len());
        let mut p = self.point.clone();
        for (c, b) in coords.iter().zip(&self.basis) {
            p = p.axpy(*c, b);
        }
        p
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        x.dist(&self.project(x)) <= tol
    }
}

/// Declarative description of a closed set with an analytic projector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    #[serde(flatten)]
    pub kind: SetKind,
}

/// The set catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SetKind {
    /// Affine subspace through `point` spanned by an orthonormal `basis`.
    AffineSubspace { point: Point, basis: Vec<Point> },
    /// `{x : <normal, x> = offset}`.
    Hyperplane { normal: Point, offset: f64 },
    /// `{x : <normal, x> <= offset}`.
    HalfSpace { normal: Point, offset: f64 },
    /// `{x : |x - center| = radius}`.
    Sphere { center: Point, radius: f64 },
    /// `{x : |x - center| <= radius}`.
    Ball { center: Point, radius: f64 },
    /// Union of the coordinate axes of `R^dim`.
    Cross { dim: usize },
    /// Closure of the complement of the open positive orthant of `R^dim`.
    OrthantComplement { dim: usize },
    /// A finite list of points.
    FinitePointSet { points: Vec<Point> },
    /// `{x : lower <= x <= upper}` coordinatewise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{x : |(Ax)_k| = modulus_k}` where `A` is the unitary transform named
    /// by `transform` ("dft"), realized as a real orthogonal matrix on the
    /// interleaved representation of `C^n` in `R^{2n}`.
    FourierMagnitude {
        modulus: Vec<f64>,
        transform: String,
    },
    /// Cartesian product of catalog sets.
    Product { components: Vec<SetSpec> },
}

/// How many nearest points a query produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Multiplicity {
    #[serde(rename = "unique")]
    Unique,
    #[serde(rename = "finite-tie")]
    FiniteTie,
    #[serde(rename = "continuum")]
    Continuum,
}

/// All nearest points of a query, equidistant from it.
///
/// `Continuum` marks a documented singular query (e.g. the center of a
/// sphere); `points` then holds a single deterministic representative and
/// callers must treat the result as degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub points: Vec<Point>,
    pub multiplicity: Multiplicity,
}

impl ProjectionResult {
    fn unique(p: Point) -> Self {
        ProjectionResult {
            points: vec![p],
            multiplicity: Multiplicity::Unique,
        }
    }

    fn from_candidates(mut candidates: Vec<(Point, f64)>) -> Self {
        debug_assert!(!candidates.is_empty());
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.lex_cmp(&b.0)));
        let best = candidates[0].1;
        let tol = TIE_TOL * (1.0 + best);
        let points: Vec<Point> = candidates
            .into_iter()
            .take_while(|(_, d)| *d <= best + tol)
            .map(|(p, _)| p)
            .collect();
        let multiplicity = if points.len() == 1 {
            Multiplicity::Unique
        } else {
            Multiplicity::FiniteTie
        };
        ProjectionResult {
            points,
            multiplicity,
        }
    }
}

impl SetSpec {
    pub fn new(kind: SetKind) -> Self {
        SetSpec {
            label: String::new(),
            kind,
        }
    }

    pub fn labeled(kind: SetKind, label: impl Into<String>) -> Self {
        SetSpec {
            label: label.into(),
            kind,
        }
    }

    pub fn affine(point: Point, basis: Vec<Point>) -> Self {
        SetSpec::new(SetKind::AffineSubspace { point, basis })
    }

    pub fn hyperplane(normal: Point, offset: f64) -> Self {
        SetSpec::new(SetKind::Hyperplane { normal, offset })
    }

    pub fn half_space(normal: Point, offset: f64) -> Self {
        SetSpec::new(SetKind::HalfSpace { normal, offset })
    }

    pub fn sphere(center: Point, radius: f64) -> Self {
        SetSpec::new(SetKind::Sphere { center, radius })
    }

    pub fn ball(center: Point, radius: f64) -> Self {
        SetSpec::new(SetKind::Ball { center, radius })
    }

    pub fn cross(dim: usize) -> Self {
        SetSpec::new(SetKind::Cross { dim })
    }

    pub fn orthant_complement(dim: usize) -> Self {
        SetSpec::new(SetKind::OrthantComplement { dim })
    }

    pub fn finite(points: Vec<Point>) -> Self {
        SetSpec::new(SetKind::FinitePointSet { points })
    }

    pub fn box_set(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        SetSpec::new(SetKind::Box { lower, upper })
    }

    pub fn fourier_magnitude(modulus: Vec<f64>) -> Self {
        SetSpec::new(SetKind::FourierMagnitude {
            modulus,
            transform: "dft".into(),
        })
    }

    pub fn product(components: Vec<SetSpec>) -> Self {
        SetSpec::new(SetKind::Product { components })
    }

    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            SetKind::AffineSubspace { point, .. } => point.dim(),
            SetKind::Hyperplane { normal, .. } | SetKind::HalfSpace { normal, .. } => normal.dim(),
            SetKind::Sphere { center, .. } | SetKind::Ball { center, .. } => center.dim(),
            SetKind::Cross { dim } | SetKind::OrthantComplement { dim } => *dim,
            SetKind::FinitePointSet { points } => points.first().map(|p| p.dim()).unwrap_or(0),
            SetKind::Box { lower, .. } => lower.len(),
            SetKind::FourierMagnitude { modulus, .. } => 2 * modulus.len(),
            SetKind::Product { components } => components.iter().map(|c| c.ambient_dim()).sum(),
        }
    }

    /// Checks the structural invariants of the catalog entry.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SetKind::AffineSubspace { point, basis } => {
                Affine::new(point.clone(), basis.clone()).validate()
            }
            SetKind::Hyperplane { normal, .. } | SetKind::HalfSpace { normal, .. } => {
                if normal.norm() == 0.0 {
                    Err(Error::InvalidParameter("zero normal vector".into()))
                } else {
                    Ok(())
                }
            }
            SetKind::Sphere { radius, .. } | SetKind::Ball { radius, .. } => {
                if *radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "radius must be positive, got {radius}"
                    )))
                }
            }
            SetKind::Cross { dim } | SetKind::OrthantComplement { dim } => {
                if *dim >= 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("dimension must be >= 1".into()))
                }
            }
            SetKind::FinitePointSet { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidParameter("empty finite point set".into()));
                }
                let d = points[0].dim();
                for p in points {
                    p.check_dim(d)?;
                }
                Ok(())
            }
            SetKind::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lower.len(),
                        found: upper.len(),
                    });
                }
                for (l, u) in lower.iter().zip(upper) {
                    if !(l.is_finite() && u.is_finite() && l <= u) {
                        return Err(Error::InvalidParameter(format!(
                            "box bounds must be finite with lower <= upper, got [{l}, {u}]"
                        )));
                    }
                }
                Ok(())
            }
            SetKind::FourierMagnitude { modulus, transform } => {
                if transform != "dft" {
                    return Err(Error::UnsupportedKind(format!(
                        "unknown unitary transform tag '{transform}'"
                    )));
                }
                if modulus.is_empty() || modulus.len() > 16 {
                    return Err(Error::InvalidParameter(
                        "Fourier magnitude supports 1 <= n <= 16 complex components".into(),
                    ));
                }
                if modulus.iter().any(|b| *b < 0.0 || !b.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "Fourier modulus must be nonnegative".into(),
                    ));
                }
                Ok(())
            }
            SetKind::Product { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("empty product set".into()));
                }
                components.iter().try_for_each(|c| c.validate())
            }
        }
    }
}

thread_local! {
    static DFT_CACHE: RefCell<HashMap<usize, Matrix>> = RefCell::new(HashMap::new());
}

/// Real orthogonal `2n x 2n` matrix implementing the unitary discrete
/// Fourier transform on the interleaved representation of `C^n`.
pub fn dft_real_matrix(n: usize) -> Matrix {
    DFT_CACHE.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let mut m = Matrix::zeros(2 * n, 2 * n);
                let scale = 1.0 / (n as f64).sqrt();
                for j in 0..n {
                    for k in 0..n {
                        let theta =
                            -2.0 * std::f64::consts::PI * (j as f64) * (k as f64) / (n as f64);
                        let (s, c) = theta.sin_cos();
                        // (c + i s)(a + i b) = (c a - s b) + i (s a + c b)
                        m[(2 * j, 2 * k)] = c * scale;
                        m[(2 * j, 2 * k + 1)] = -s * scale;
                        m[(2 * j + 1, 2 * k)] = s * scale;
                        m[(2 * j + 1, 2 * k + 1)] = c * scale;
                    }
                }
                m
            })
            .clone()
    })
}

/// Nearest points of `set` to `x`.
pub fn project(set: &SetSpec, x: &Point) -> Result<ProjectionResult> {
    x.check_dim(set.ambient_dim())?;
    set.validate()?;
    Ok(match &set.kind {
        SetKind::AffineSubspace { point, basis } => {
            ProjectionResult::unique(Affine::new(point.clone(), basis.clone()).project(x))
        }
        SetKind::Hyperplane { normal, offset } => {
            let t = (normal.dot(x) - offset) / normal.dot(normal);
            ProjectionResult::unique(x.axpy(-t, normal))
        }
        SetKind::HalfSpace { normal, offset } => {
            if normal.dot(x) <= *offset {
                ProjectionResult::unique(x.clone())
            } else {
                let t = (normal.dot(x) - offset) / normal.dot(normal);
                ProjectionResult::unique(x.axpy(-t, normal))
            }
        }
        SetKind::Sphere { center, radius } => {
            let d = x.sub(center);
            let rho = d.norm();
            if rho == 0.0 {
                // The center is equidistant to the whole sphere; return the
                // representative in the first canonical direction.
                let mut rep = center.clone().into_coords();
                rep[0] += radius;
                ProjectionResult {
                    points: vec![Point::new(rep)],
                    multiplicity: Multiplicity::Continuum,
                }
            } else {
                ProjectionResult::unique(center.axpy(radius / rho, &d))
            }
        }
        SetKind::Ball { center, radius } => {
            let d = x.sub(center);
            let rho = d.norm();
            if rho <= *radius {
                ProjectionResult::unique(x.clone())
            } else {
                ProjectionResult::unique(center.axpy(radius / rho, &d))
            }
        }
        SetKind::Cross { dim } => {
            let candidates: Vec<(Point, f64)> = (0..*dim)
                .map(|i| {
                    let mut c = vec![0.0; *dim];
                    c[i] = x.coords()[i];
                    let p = Point::new(c);
                    let d = x.dist(&p);
                    (p, d)
                })
                .collect();
            ProjectionResult::from_candidates(candidates)
        }
        SetKind::OrthantComplement { dim } => {
            let min = x.coords().iter().cloned().fold(f64::INFINITY, f64::min);
            if min <= 0.0 {
                ProjectionResult::unique(x.clone())
            } else {
                // All coordinates strictly positive: drop one minimal
                // coordinate to zero; every minimizer ties.
                let candidates: Vec<(Point, f64)> = (0..*dim)
                    .map(|i| {
                        let mut c = x.coords().to_vec();
                        let d = c[i];
                        c[i] = 0.0;
                        (Point::new(c), d)
                    })
                    .collect();
                ProjectionResult::from_candidates(candidates)
            }
        }
        SetKind::FinitePointSet { points } => {
            let candidates: Vec<(Point, f64)> =
                points.iter().map(|p| (p.clone(), x.dist(p))).collect();
            ProjectionResult::from_candidates(candidates)
        }
        SetKind::Box { lower, upper } => {
            let p: Vec<f64> = x
                .coords()
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(c, (l, u))| c.max(*l).min(*u))
                .collect();
            ProjectionResult::unique(Point::new(p))
        }
        SetKind::FourierMagnitude { modulus, .. } => {
            let n = modulus.len();
            let a = dft_real_matrix(n);
            let y = a.matvec(x.coords());
            let mut y_hat = vec![0.0; 2 * n];
            let mut continuum = false;
            for (k, b) in modulus.iter().enumerate() {
                let (re, im) = (y[2 * k], y[2 * k + 1]);
                let rho = re.hypot(im);
                if rho == 0.0 {
                    // Vanishing component: any phase is nearest.  Use the
                    // first canonical (real-axis) phase as representative.
                    y_hat[2 * k] = *b;
                    y_hat[2 * k + 1] = 0.0;
                    if *b > 0.0 {
                        continuum = true;
                    }
                } else {
                    y_hat[2 * k] = b / rho * re;
                    y_hat[2 * k + 1] = b / rho * im;
                }
            }
            let p = Point::new(a.matvec_transpose(&y_hat));
            ProjectionResult {
                points: vec![p],
                multiplicity: if continuum {
                    Multiplicity::Continuum
                } else {
                    Multiplicity::Unique
                },
            }
        }
        SetKind::Product { components } => {
            let mut offset = 0;
            let mut block_results = Vec::with_capacity(components.len());
            let mut continuum = false;
            let mut tie = false;
            for c in components {
                let d = c.ambient_dim();
                let block = Point::new(x.coords()[offset..offset + d].to_vec());
                let r = project(c, &block)?;
                continuum |= r.multiplicity == Multiplicity::Continuum;
                tie |= r.multiplicity == Multiplicity::FiniteTie;
                block_results.push(r.points);
                offset += d;
            }
            // Cartesian product of the per-block ties.
            let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
            for block in &block_results {
                let mut next = Vec::with_capacity(combos.len() * block.len());
                for prefix in &combos {
                    for p in block {
                        let mut v = prefix.clone();
                        v.extend_from_slice(p.coords());
                        next.push(v);
                    }
                }
                combos = next;
            }
            let points: Vec<Point> = combos.into_iter().map(Point::new).collect();
            let multiplicity = if continuum {
                Multiplicity::Continuum
            } else if tie || points.len() > 1 {
                Multiplicity::FiniteTie
            } else {
                Multiplicity::Unique
            };
            ProjectionResult {
                points,
                multiplicity,
            }
        }
    })
}

/// Reflection `2 P(x) - x`, one image per projection branch.
pub fn reflect(set: &SetSpec, x: &Point) -> Result<Vec<Point>> {
    let proj = project(set, x)?;
    Ok(proj.points.iter().map(|p| p.scale(2.0).sub(x)).collect())
}

/// Distance from `x` to the set.
pub fn distance(set: &SetSpec, x: &Point) -> Result<f64> {
    let proj = project(set, x)?;
    Ok(x.dist(&proj.points[0]))
}
