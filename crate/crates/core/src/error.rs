use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("matrix contains a non-finite entry")]
    NonFinite,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("complex poles must appear in conjugate pairs (unmatched pole {re} + {im}i)")]
    NonConjugatePoles { re: f64, im: f64 },

    #[error("plant not reachable")]
    NotReachable,

    #[error("input vector B must have a nonzero entry")]
    ZeroInput,

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("packet design infeasible: residual {residual:e} exceeds threshold {threshold:e}")]
    Infeasible { residual: f64, threshold: f64 },

    #[error("actuator buffer exhausted at cursor {cursor}")]
    BufferExhausted { cursor: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
