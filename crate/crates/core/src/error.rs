use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("sweep {sweep}, {step}: {source}")]
    Step {
        sweep: usize,
        step: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config: {0}")]
    Config(String),
    #[error("draw store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
