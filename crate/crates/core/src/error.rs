use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("mismatched jets: {0}")]
    MismatchedJets(String),

    #[error("jet order exhausted: cannot differentiate an order-0 jet")]
    OrderExhausted,

    #[error("metric is not positive definite at {point:?} (pivot {pivot} = {value:e})")]
    NotPositiveDefinite {
        point: Vec<f64>,
        pivot: usize,
        value: f64,
    },

    #[error("matrix is not antisymmetric (residual {0:e})")]
    NotAntisymmetric(f64),

    #[error("unknown zoo entry `{0}`")]
    UnknownEntry(String),

    #[error(
        "classification mismatch for `{name}`: expected {expected}, found {found} at {point:?}"
    )]
    ClassificationMismatch {
        name: String,
        expected: String,
        found: String,
        point: Vec<f64>,
    },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("momentum degree {0} exceeds the supported maximum")]
    MomentumDegree(usize),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
