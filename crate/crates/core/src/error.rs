//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by geometry, operator, product-space, regularity and
/// driver operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A point does not match the ambient dimension of a set or operator.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A set or function kind is not supported by the requested operation.
    #[error("unsupported kind: {0}")]
    UnsupportedKind(String),

    /// The prox linear system `(I + 2*lambda*A) p = x - lambda*b` is
    /// numerically singular.
    #[error("singular prox system (condition estimate {condition:.3e})")]
    SingularProx { condition: f64 },

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Branch enumeration would exceed the caller-supplied budget.
    #[error("branch budget exceeded (budget {budget})")]
    BranchBudgetExceeded { budget: usize },

    /// A point claimed as a fixed point fails the fixed-point residual check.
    #[error("not a fixed point (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NotAFixedPoint { residual: f64, tolerance: f64 },

    /// `(y, v)` fails the proximal-normal membership check
    /// `y ∈ P(y + v)`.
    #[error("not a normal pair (membership residual {residual:.3e})")]
    NotANormalPair { residual: f64 },

    /// Every sample of an estimator was excluded by its guard thresholds.
    #[error("empty sample: all sampled points were excluded")]
    EmptySample,

    /// A zero set required by an estimator is empty or unusable.
    #[error("degenerate zero set")]
    DegenerateZeroSet,

    /// The inverse image required by the subtransversality estimator is not
    /// available and could not be approximated.
    #[error("inverse set unavailable")]
    InverseSetUnavailable,

    /// A trace lacks the reference distances needed for rate analysis.
    #[error("missing reference distances on trace")]
    MissingReference,

    /// An operator error that occurred inside a Picard run, annotated with
    /// the iteration index.
    #[error("iteration {index}: {source}")]
    Iteration {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the Picard iteration index at which it occurred.
    pub fn at_iteration(self, index: usize) -> Error {
        Error::Iteration {
            index,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
