//! Numerical laboratory for set-valued fixed-point iterations.
//!
//! The crate builds fixed-point operators out of analytic projectors and
//! prox maps (cyclic projections, forward-backward, Douglas-Rachford and
//! its RAAR relaxation), runs traced Picard iterations on them, estimates
//! the two regularity quantities that drive convergence — the
//! almost-averaging violation and the modulus of metric subregularity —
//! and certifies linear or per-annulus rates from the estimated or
//! closed-form constants.
//!
//! Modules, bottom up:
//!
//! * [`geometry`] — the catalog of sets and functions with exact
//!   projectors, reflectors, prox maps and distances;
//! * [`operators`] — combinators assembling set-valued self-maps, with
//!   branch selection policies;
//! * [`productspace`] — the cyclic-projections machinery on `E^m`:
//!   permutation, alignment map, cycles, difference vectors and the
//!   shifted operator;
//! * [`regularity`] — sampling estimators for violation profiles,
//!   subregularity moduli, elemental subregularity, subtransversality and
//!   the coupling constant, plus rate certification and the closed-form
//!   constant tables;
//! * [`driver`] — the traced Picard loop, annular rate analysis and
//!   certificate verdicts.

pub mod driver;
pub mod error;
pub mod geometry;
pub mod matrix;
pub mod operators;
pub mod point;
pub mod productspace;
pub mod regularity;
pub mod sampling;

pub use error::{Error, Result};
pub use point::Point;
