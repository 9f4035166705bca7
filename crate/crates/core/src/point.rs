//! Points of the ambient Euclidean space `R^n`.
//!
//! Complex data is represented in `R^{2n}` with interleaved real and
//! imaginary parts, so a single real vector type covers the whole catalog.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^n`, `n >= 1`.  Coordinates are finite 64-bit reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    /// Creates a point from its coordinates.
    ///
    /// Panics if `coords` is empty or contains a non-finite value; points
    /// fed in from external configuration are validated at the parsing
    /// boundary instead.
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(!coords.is_empty(), "a point needs at least one coordinate");
        assert!(
            coords.iter().all(|c| c.is_finite()),
            "point coordinates must be finite"
        );
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Checks that `self` lives in ambient dimension `expected`.
    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            })
        }
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.sub(other).norm()
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total lexicographic order on coordinates.  Used to resolve
    /// set-valued branches deterministically and to sort branch lists.
    pub fn lex_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.0.iter().zip(&other.0) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point::new(coords)
    }
}

impl From<&[f64]> for Point {
    fn from(coords: &[f64]) -> Self {
        Point::new(coords.to_vec())
    }
}

/// Shorthand for building a point from a coordinate list.
#[macro_export]
macro_rules! point {
    ($($c:expr),+ $(,)?) => {
        $crate::point::Point::new(vec![$($c as f64),+])
    };
}

/// Sorts a branch list lexicographically and removes near-duplicates.
///
/// Two branches closer than `tol` in the max norm are considered the same
/// finite tie reached through different branch orders.
pub fn sort_dedup(mut points: Vec<Point>, tol: f64) -> Vec<Point> {
    points.sort_by(|a, b| a.lex_cmp(b));
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().map(|q| q.max_abs_diff(&p) > tol).unwrap_or(true) {
            out.push(p);
        }
    }
    out
}
