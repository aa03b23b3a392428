//! Exact-arithmetic laboratory for weighted inhomogeneous Diophantine
//! approximation, driven through the dynamics of diagonal flows on the space
//! of affine unimodular lattices.
//!
//! Everything that decides anything — shortest vectors, quasi-norm
//! comparisons, escape-of-mass counts, covering-construction inequalities —
//! runs over exact rationals. Irrational quantities (fractional powers of
//! rationals, log-ratio dimensions) are carried in closed form and compared
//! either by cross-powering to integer exponents or by certified interval
//! evaluation with precision escalation. Floating point appears only in
//! reports, never in a branch.

pub mod bounds;
pub mod covering;
pub mod diophantine;
pub mod exact;
pub mod fractal;
pub mod height;
pub mod lattice;
pub mod weights;

use thiserror::Error;

/// Library-wide error type. Variants mirror the failure surfaces of the
/// public operations; everything else panics only on internal invariant
/// breakage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("premise violation: {0}")]
    PremiseViolation(String),
    #[error("open set condition violated: {0}")]
    OscViolated(String),
    #[error("invalid IFS: {0}")]
    InvalidIfs(String),
    #[error("scale out of admissible grid: {0}")]
    ScaleOutOfRange(String),
    #[error("infeasible eta profile: {0}")]
    InfeasibleEta(String),
    #[error("non-rational eta profile does not support {0}")]
    NonRationalEta(&'static str),
    #[error("covering invariant violated: {0}")]
    CoveringInvariant(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
