use thiserror::Error;

#[derive(Debug, Error)]
pub enum GfenError {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid tree: {0}")]
    Tree(String),

    #[error("observation {index} has value {value} below the tree support minimum {min}")]
    BelowSupport { index: usize, value: f64, min: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("ingest error: {0}")]
    Ingest(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GfenError>;
