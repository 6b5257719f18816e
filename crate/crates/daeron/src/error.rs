use crate::dual::GradientId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate record ({agent},{time}) delivered to a compact ledger", agent = .0.agent, time = .0.time)]
    DuplicateRecord(GradientId),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("graph is disconnected; diameter undefined")]
    Disconnected,
    #[error("churn must stay below connectivity (c={churn}, k={connectivity})")]
    ChurnTooLarge { churn: u64, connectivity: u64 },
    #[error("oracle precision failure: {0} (raise the iteration budget)")]
    OraclePrecision(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty history")]
    EmptyHistory,
    #[error("csv schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
