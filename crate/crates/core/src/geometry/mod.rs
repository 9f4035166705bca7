//! Analytic projectors, reflectors, prox operators and distance functions
//! for the catalog of closed sets and structured functions.

mod functions;
mod sets;

pub use functions::{evaluate, moreau_envelope, prox, FunctionSpec, PROX_CONDITION_LIMIT};
pub use sets::{
    dft_real_matrix, distance, project, reflect, Affine, Multiplicity, ProjectionResult, SetKind,
    SetSpec, MEMBERSHIP_TOL, ORTHONORMAL_TOL, TIE_TOL,
};
