use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("could not generate a connected topology after {attempts} attempts")]
    TopologyGeneration { attempts: usize },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("not enough data: need {needed} users, found {found}")]
    DataInsufficient { needed: usize, found: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("counter audit failed for {algorithm}: expected {expected:?} per node per round, observed {observed:?}")]
    AuditFailure {
        algorithm: String,
        expected: (u64, u64),
        observed: (u64, u64),
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
