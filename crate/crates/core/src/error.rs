use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid asset population: {0}")]
    InvalidPopulation(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// Expected returns and unit costs are (numerically) proportional, so the
    /// cost and return constraints collapse onto one direction.
    #[error(
        "degenerate population: moment discriminant {discriminant:e} below threshold {threshold:e}"
    )]
    DegeneratePopulation { discriminant: f64, threshold: f64 },

    #[error("invalid bounded Pareto spec: {0}")]
    InvalidParetoSpec(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("period ratio alpha = {0} is out of range (must exceed 1)")]
    AlphaOutOfRange(f64),

    #[error("inverse temperature beta = {0} must be positive")]
    InvalidBeta(f64),

    #[error("risk matrix is not positive definite (Cholesky factorization failed)")]
    SingularMatrix,

    #[error("cost and return constraints are collinear: (ad - b^2)/(ad) = {relative_gram:e}")]
    CollinearConstraints { relative_gram: f64 },

    #[error("constraint violated after solve: {which} residual {residual:e}")]
    ConstraintViolation { which: &'static str, residual: f64 },

    #[error("risk must be positive to form a Sharpe ratio, got {0}")]
    NonPositiveRisk(f64),

    /// The Sharpe-maximizing point is undefined because the risk vertex sits
    /// at the zero-excess-return point (R0 = C, or C0 = R on the cost axis).
    #[error("Sharpe extremum undefined: risk vertex coincides with zero excess return")]
    VertexAtOrigin,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trial {trial_index} failed: {source}")]
    TrialFailed {
        trial_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("experiment failed: {failed} of {total} trials errored")]
    ExperimentFailed { failed: usize, total: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
