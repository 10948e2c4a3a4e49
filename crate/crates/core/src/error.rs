//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, linear algebra, information
/// measures and tree optimizers.
#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky pivot fell at or below the positivity tolerance. No
    /// automatic jitter is applied; callers decide how to regularize.
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// Symmetry violated beyond the construction tolerance of 1e-12.
    #[error("matrix is not symmetric: |M[{row}][{col}] - M[{col}][{row}]| = {delta:.3e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("duplicate index {index} in submatrix selection")]
    DuplicateIndex { index: usize },

    /// The coefficient matrix of a generative model references the present
    /// or future, or a noise variance is non-positive. The report lists
    /// every violation with (process, time) coordinates.
    #[error("invalid generative model:\n{report}")]
    InvalidModel { report: crate::model::ValidationReport },

    /// An information quantity came out more negative than the -1e-9
    /// clamping tolerance allows, which indicates a numerical problem
    /// rather than ordinary floating-point noise.
    #[error("numerical inconsistency: information quantity {value:.6e} below clamp tolerance")]
    NumericalInconsistency { value: f64 },

    /// Tree enumeration guarded to small node counts.
    #[error("node count {nodes} too large to enumerate (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    /// A weight matrix of the wrong kind was handed to an optimizer.
    #[error("weight kind mismatch: expected {expected}, got {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    /// Tree optimizers require nonnegative weights (beyond -1e-9 noise).
    #[error("negative weight {value:.3e} at [{row}][{col}]")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    /// A tree failed its structural invariants (edge count, in-degrees,
    /// reachability from the root).
    #[error("invalid tree: {reason}")]
    InvalidTree { reason: String },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
