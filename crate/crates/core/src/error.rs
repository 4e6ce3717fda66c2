use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("filtration stage {stage} does not refine stage {prev}")]
    NotRefinement { prev: usize, stage: usize },

    #[error("{op}: non-finite value at outcome {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("NaN at outcome {0}")]
    NaN(usize),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("modular never drops to the target within {expansions} expansions")]
    Divergence { expansions: usize },

    #[error("no bracket after {expansions} expansions")]
    NoBracket { expansions: usize },

    #[error("no convergence after {iterations} iterations (best value {best_value})")]
    Convergence { iterations: usize, best_value: f64 },

    #[error("contract violation: {0}")]
    Contract(String),
}
