use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: malformed record in [{section}]: {reason}")]
    MalformedRecord {
        line: usize,
        section: String,
        reason: String,
    },
    #[error("line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: link '{link}' references unknown node '{node}'")]
    DanglingReference {
        line: usize,
        link: String,
        node: String,
    },
    #[error("line {line}: unknown identifier '{id}' in [{section}]")]
    UnknownId {
        line: usize,
        section: String,
        id: String,
    },
    #[error("unknown unit '{0}'")]
    UnknownUnit(String),
    #[error("unsupported headloss formula '{0}'")]
    UnknownHeadloss(String),
    #[error("pump '{pump}' curve is underdetermined: {reason}")]
    PumpCurveUnderdetermined { pump: String, reason: String },
    #[error("non-positive dimension: {0}")]
    NonPositiveDimension(String),
    #[error("negative pump flow {0}")]
    NegativeFlow(f64),
    #[error("valve '{0}' is closed")]
    ClosedValve(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular system; implicated rows: {}", rows.join(", "))]
    SingularSystem { rows: Vec<String> },
    #[error("iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("newton iteration stalled after {iterations} iterations (residual {residual:e})")]
    NewtonStall { iterations: usize, residual: f64 },
    #[error("infeasible generator request: {0}")]
    InfeasibleSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("network failed validation: {0}")]
    Validation(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
