use thiserror::Error;

use crate::point::PointVector;

/// Failures raised while labeling points through a [`crate::models::ModelOracle`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("query budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: u64, remaining: u64 },

    #[error("point has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {0} is outside the lookup table support")]
    OffSupport(PointVector),

    #[error("transport failure after {acknowledged} acknowledged labels: {message}")]
    Transport { message: String, acknowledged: u64 },

    #[error("protocol violation after {acknowledged} acknowledged labels: {message}")]
    Protocol { message: String, acknowledged: u64 },

    #[error("remote model reported an error for request {id}: {message}")]
    Remote { id: u64, message: String, acknowledged: u64 },
}

impl OracleError {
    /// Labels the backend delivered before failing.
    pub fn acknowledged(&self) -> u64 {
        match self {
            OracleError::Transport { acknowledged, .. }
            | OracleError::Protocol { acknowledged, .. }
            | OracleError::Remote { acknowledged, .. } => *acknowledged,
            _ => 0,
        }
    }

    /// How many labels the failed request was short by, for budget failures.
    pub fn shortfall(&self) -> Option<u64> {
        match self {
            OracleError::BudgetExceeded { requested, remaining } => Some(requested.saturating_sub(*remaining)),
            _ => None,
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, OracleError::BudgetExceeded { .. })
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("invalid dimension {0}: expected 1 <= n <= 30")]
    InvalidDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported property for this path: {0}")]
    UnsupportedProperty(String),

    #[error("unsupported distribution for this path: {0}")]
    UnsupportedDistribution(String),

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("estimate stopped after {completed} of {requested} samples: {source}")]
    PartialEstimate {
        completed: usize,
        requested: usize,
        partial: Option<f64>,
        #[source]
        source: OracleError,
    },

    #[error("enumeration stopped after {completed} points: {source}")]
    EnumerationFailed {
        completed: usize,
        #[source]
        source: OracleError,
    },

    #[error("degenerate sensitive group: {0}")]
    DegenerateGroup(String),

    #[error("sensitive group {group:+} starved after {attempts} draws")]
    StarvedGroup { group: i8, attempts: usize },

    #[error("no label pair has both sensitive groups represented")]
    NoValidPair,

    #[error("dimension {n} exceeds the exact-enumeration cap of {cap}; use a Monte-Carlo reference instead")]
    TooLarge { n: usize, cap: usize },

    #[error("requested {requested} members but only {available} distinct sign patterns exist")]
    CountTooLarge { requested: u128, available: u128 },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AuditError {
    /// The oracle failure underneath this error, if any.
    pub fn oracle_cause(&self) -> Option<&OracleError> {
        match self {
            AuditError::Oracle(e) => Some(e),
            AuditError::PartialEstimate { source, .. } | AuditError::EnumerationFailed { source, .. } => {
                Some(source)
            }
            _ => None,
        }
    }
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;
