//! Error type shared by all library modules.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input had the wrong length or shape.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A correlation matrix could not be factorized even after nugget
    /// escalation; carries the final nugget tried.
    #[error("correlation matrix not positive definite (final nugget {nugget:e})")]
    Conditioning { nugget: f64 },

    /// Too few observations for the requested trend (needs n > q, and
    /// n >= q + 3 for the hierarchical predictive to have df > 2).
    #[error("insufficient data: n = {n} observations for q = {q} basis functions")]
    InsufficientData { n: usize, q: usize },

    /// A Student-t based quantity was requested with inadmissible
    /// degrees of freedom.
    #[error("degrees of freedom {df} too small (requires df > {min})")]
    DegreesOfFreedom { df: f64, min: f64 },

    /// Degenerate fit: the generalized residual sum of squares is not
    /// positive, so the marginal likelihood in (a, b) is ill-defined.
    #[error("degenerate fit: generalized residual sum of squares w = {w:e}")]
    DegenerateFit { w: f64 },

    /// A parameter was outside its admissible range.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// Non-finite value where a finite one is required.
    #[error("non-finite value encountered in {what}")]
    NonFinite { what: String },

    /// An optimization subroutine had no candidates to work with.
    #[error("empty candidate set")]
    EmptyCandidates,

    /// No trend order in the candidate list was feasible for the data.
    #[error("no feasible trend order among candidates {candidates:?} for n = {n}")]
    NoFeasibleTrend { candidates: Vec<usize>, n: usize },

    /// A search failed to produce any usable iterate.
    #[error("search failed: {detail}")]
    Search { detail: String },

    /// The objective function failed to produce a usable value.
    #[error("objective evaluation failed: {detail}")]
    Objective { detail: String },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Helper for `InvalidParameter` with formatted context.
    pub fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidParameter { what: what.into() }
    }
}
