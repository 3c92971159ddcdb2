use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state is not normalized: |amp_up|^2 + |amp_down|^2 = {norm_sqr}")]
    InvalidState { norm_sqr: f64 },
    #[error("measurement axis is not a unit vector: |bloch| = {norm}")]
    InvalidAxis { norm: f64 },
    #[error("ensemble is empty or balancing would leave fewer than two qubits")]
    EmptyEnsemble,
    #[error("ensemble is already balanced; pruning runs on raw ensembles only")]
    AlreadyPruned,
    #[error("outcome record length {record} does not match ensemble length {ensemble}")]
    Misaligned { record: usize, ensemble: usize },
    #[error("message payload is not {expected}")]
    PayloadMismatch { expected: &'static str },
    #[error("channel latency must be non-negative, got {0}")]
    NegativeLatency(f64),
    #[error("event log violates causality: {0}")]
    CausalityViolation(String),
    #[error("count {0} is outside the exact-oracle range 1..=10000")]
    OutsideOracleRange(usize),
    #[error("count {0} is odd; the imbalance statistic assumes an even count")]
    OddCount(usize),
    #[error("histogram has no samples")]
    EmptyHistogram,
    #[error("joint count table has no positive entries")]
    EmptyJointCounts,
    #[error("scaling fit needs at least 3 points, all with positive values")]
    InsufficientFitPoints,
    #[error("variance estimate needs at least 2 samples")]
    InsufficientSamples,
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("{0}")]
    Io(String),
}

impl Error {
    pub fn invalid_config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Exit code the CLI maps this error to: 1 for configuration problems,
    /// 2 for internal invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig { .. } => 1,
            _ => 2,
        }
    }
}
