//! Structured functions and their prox maps.
//!
//! The prox of `f` at parameter `lambda` is the minimizer of
//! `f(y) + |y - x|^2 / (2 lambda)`; its optimal value is the Moreau
//! envelope.  For indicator functions the prox is the projector for every
//! `lambda`, which the tests pin down explicitly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::sets::{project, Multiplicity, ProjectionResult, SetSpec};
use crate::matrix::Matrix;
use crate::point::Point;

/// Condition-number threshold past which the quadratic prox system is
/// treated as numerically singular.
pub const PROX_CONDITION_LIMIT: f64 = 1e14;

/// The function catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FunctionSpec {
    /// `f(x) = x' A x + b' x` with `A` symmetric.
    Quadratic {
        #[serde(rename = "A")]
        a: Matrix,
        b: Point,
    },
    /// `g(x) = weight * |D x|_1` with `D = diag(scaling)`.
    L1 { weight: f64, scaling: Vec<f64> },
    /// Indicator of a catalog set.
    Indicator { set: SetSpec },
    /// Moreau envelope `e_{lambda,f}` of another catalog function.
    MoreauEnvelopeOf {
        function: Box<FunctionSpec>,
        lambda: f64,
    },
}

impl FunctionSpec {
    pub fn quadratic(a: Matrix, b: Point) -> Self {
        FunctionSpec::Quadratic { a, b }
    }

    pub fn l1(weight: f64, scaling: Vec<f64>) -> Self {
        FunctionSpec::L1 { weight, scaling }
    }

    pub fn indicator(set: SetSpec) -> Self {
        FunctionSpec::Indicator { set }
    }

    pub fn moreau_envelope_of(function: FunctionSpec, lambda: f64) -> Self {
        FunctionSpec::MoreauEnvelopeOf {
            function: Box::new(function),
            lambda,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            FunctionSpec::Quadratic { b, .. } => b.dim(),
            FunctionSpec::L1 { scaling, .. } => scaling.len(),
            FunctionSpec::Indicator { set } => set.ambient_dim(),
            FunctionSpec::MoreauEnvelopeOf { function, .. } => function.ambient_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Quadratic { a, b } => {
                if a.rows != a.cols || a.rows != b.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: b.dim(),
                        found: a.rows,
                    });
                }
                if !a.is_symmetric(1e-12) {
                    return Err(Error::InvalidParameter(
                        "quadratic matrix must be symmetric to 1e-12".into(),
                    ));
                }
                Ok(())
            }
            FunctionSpec::L1 { weight, scaling } => {
                if *weight < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "l1 weight must be nonnegative, got {weight}"
                    )));
                }
                if scaling.is_empty() {
                    return Err(Error::InvalidParameter("empty l1 scaling".into()));
                }
                Ok(())
            }
            FunctionSpec::Indicator { set } => set.validate(),
            FunctionSpec::MoreauEnvelopeOf { function, lambda } => {
                if *lambda <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "Moreau parameter must be positive, got {lambda}"
                    )));
                }
                function.validate()
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "prox parameter must be positive, got {lambda}"
        )))
    }
}

/// Prox map of `f` with parameter `lambda` at `x`.
pub fn prox(f: &FunctionSpec, lambda: f64, x: &Point) -> Result<ProjectionResult> {
    check_lambda(lambda)?;
    x.check_dim(f.ambient_dim())?;
    f.validate()?;
    match f {
        FunctionSpec::Indicator { set } => project(set, x),
        FunctionSpec::L1 { weight, scaling } => {
            let p: Vec<f64> = x
                .coords()
                .iter()
                .zip(scaling)
                .map(|(xi, di)| soft_threshold(*xi, lambda * weight * di.abs()))
                .collect();
            Ok(ProjectionResult {
                points: vec![Point::new(p)],
                multiplicity: Multiplicity::Unique,
            })
        }
        FunctionSpec::Quadratic { a, b } => {
            let n = x.dim();
            let mut m = Matrix::identity(n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += 2.0 * lambda * a[(i, j)];
                }
            }
            let rhs = x.axpy(-lambda, b);
            let (sol, condition) = m.solve(rhs.coords())?;
            if condition > PROX_CONDITION_LIMIT {
                return Err(Error::SingularProx { condition });
            }
            Ok(ProjectionResult {
                points: vec![Point::new(sol)],
                multiplicity: Multiplicity::Unique,
            })
        }
        FunctionSpec::MoreauEnvelopeOf {
            function,
            lambda: mu,
        } => {
            // prox of an envelope reduces to the prox of the underlying
            // function at the summed parameter:
            //   prox_{lambda, e_{mu,f}}(x) = x + lambda/(lambda+mu) *
            //       (prox_{lambda+mu, f}(x) - x).
            let inner = prox(function, lambda + mu, x)?;
            let t = lambda / (lambda + mu);
            Ok(ProjectionResult {
                points: inner.points.iter().map(|p| x.axpy(t, &p.sub(x))).collect(),
                multiplicity: inner.multiplicity,
            })
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Pointwise value of a catalog function.  Indicators evaluate to
/// `+infinity` off the set (membership tolerance `1e-10`).
pub fn evaluate(f: &FunctionSpec, x: &Point) -> Result<f64> {
    x.check_dim(f.ambient_dim())?;
    match f {
        FunctionSpec::Quadratic { a, b } => Ok(x.dot(&a.apply(x)) + b.dot(x)),
        FunctionSpec::L1 { weight, scaling } => Ok(weight
            * x.coords()
                .iter()
                .zip(scaling)
                .map(|(xi, di)| (di * xi).abs())
                .sum::<f64>()),
        FunctionSpec::Indicator { set } => {
            let d = crate::geometry::sets::distance(set, x)?;
            Ok(if d <= 1e-10 { 0.0 } else { f64::INFINITY })
        }
        FunctionSpec::MoreauEnvelopeOf { function, lambda } => {
            moreau_envelope(function, *lambda, x)
        }
    }
}

/// Moreau envelope `inf_y f(y) + |y - x|^2 / (2 lambda)`, evaluated at the
/// prox point.
pub fn moreau_envelope(f: &FunctionSpec, lambda: f64, x: &Point) -> Result<f64> {
    let p = prox(f, lambda, x)?;
    let y = &p.points[0];
    Ok(evaluate(f, y)? + y.dist(x).powi(2) / (2.0 * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sets::SetSpec;
    use crate::point;

    #[test]
    fn l1_prox_soft_thresholds() {
        let f = FunctionSpec::l1(1.0, vec![1.0, 1.0]);
        let p = prox(&f, 1.0, &point![3.0, -0.5]).unwrap();
        assert_eq!(p.points[0], point![2.0, 0.0]);
    }

    #[test]
    fn indicator_prox_is_projector_for_any_lambda() {
        let f = FunctionSpec::indicator(SetSpec::ball(point![0.0, 0.0], 1.0));
        for lambda in [0.1, 1.0, 7.0, 10.0] {
            let p = prox(&f, lambda, &point![0.0, 3.0]).unwrap();
            assert!(p.points[0].dist(&point![0.0, 1.0]) < 1e-14);
        }
    }

    #[test]
    fn quadratic_prox_solves_linear_system() {
        let f = FunctionSpec::quadratic(Matrix::identity(2), point![0.0, 0.0]);
        let p = prox(&f, 1.0, &point![3.0, 0.0]).unwrap();
        assert!(p.points[0].dist(&point![1.0, 0.0]) < 1e-14);
    }

    #[test]
    fn near_singular_quadratic_prox_is_flagged() {
        // I + 2*lambda*A == 0 at lambda = 0.5, A = -I/... pick A = -0.5 I.
        let f = FunctionSpec::quadratic(Matrix::diagonal(&[-0.5, -0.5]), point![0.0, 0.0]);
        assert!(matches!(
            prox(&f, 1.0, &point![1.0, 1.0]),
            Err(Error::SingularProx { .. })
        ));
    }

    /// 1-D brute-force prox oracle on a fine grid, refined once.
    fn prox_oracle_1d(f: impl Fn(f64) -> f64, lambda: f64, x: f64) -> f64 {
        let objective = |y: f64| f(y) + (y - x) * (y - x) / (2.0 * lambda);
        let mut best = x;
        let mut width = 8.0_f64.max(2.0 * x.abs());
        let mut center = x;
        for _ in 0..6 {
            let mut best_val = f64::INFINITY;
            for i in 0..=4000 {
                let y = center - width + (i as f64) * width / 2000.0;
                let v = objective(y);
                if v < best_val {
                    best_val = v;
                    best = y;
                }
            }
            center = best;
            width /= 100.0;
        }
        best
    }

    #[test]
    fn moreau_envelope_values() {
        // Indicator of the unit sphere: half the squared distance.
        let f = FunctionSpec::indicator(SetSpec::sphere(point![0.0, 0.0], 1.0));
        assert!((moreau_envelope(&f, 1.0, &point![0.0, 3.0]).unwrap() - 2.0).abs() < 1e-12);

        // L1 in one dimension: the Huber value, cross-checked against a
        // brute-force minimization.
        let g = FunctionSpec::l1(1.0, vec![1.0]);
        let got = moreau_envelope(&g, 1.0, &point![0.5]).unwrap();
        assert!((got - 0.125).abs() < 1e-12);
        let y_star = prox_oracle_1d(|y| y.abs(), 1.0, 0.5);
        let oracle = y_star.abs() + (y_star - 0.5) * (y_star - 0.5) / 2.0;
        assert!((got - oracle).abs() < 1e-6);

        // Indicator of a hyperplane at lambda = 2: dist^2 / (2 lambda).
        let h = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        assert!((moreau_envelope(&h, 2.0, &point![5.0, 4.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_prox_identity() {
        // prox of e_{mu, |.|} against the brute-force oracle.
        let env = FunctionSpec::moreau_envelope_of(FunctionSpec::l1(1.0, vec![1.0]), 0.5);
        let p = prox(&env, 1.0, &point![2.0]).unwrap();
        let huber = |y: f64| {
            // e_{0.5,|.|}(y): Huber with threshold 0.5.
            if y.abs() <= 0.5 {
                y * y
            } else {
                y.abs() - 0.25
            }
        };
        let oracle = prox_oracle_1d(huber, 1.0, 2.0);
        assert!((p.points[0].coords()[0] - oracle).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let f = FunctionSpec::l1(1.0, vec![1.0]);
        assert!(prox(&f, 0.0, &point![1.0]).is_err());
        assert!(prox(&f, -1.0, &point![1.0]).is_err());
    }

    #[test]
    fn function_spec_json_round_trip() {
        let f = FunctionSpec::l1(0.1, vec![1.0, 1.0]);
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"kind\":\"L1\""));
        let back: FunctionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }
}
