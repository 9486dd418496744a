use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph error: {0}")]
    Graph(String),

    #[error("simulation error: {0}")]
    Sim(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("benchmark error: {0}")]
    Bench(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
