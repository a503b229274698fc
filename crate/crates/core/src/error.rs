use thiserror::Error;

pub type Result<T> = std::result::Result<T, ShineError>;

/// Errors raised anywhere in the pipeline.
///
/// Variants fall in two families: data/validation problems (malformed input
/// files, schema violations, shape mismatches) and numeric failures (NaN or
/// infinite values during training). [`ShineError::is_numeric`] tells them apart.
#[derive(Debug, Error)]
pub enum ShineError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("span ({start},{end}) out of range for sentence of length {len}")]
    Range { start: usize, end: usize, len: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{path}:{line}:{column}: {message}")]
    Corpus {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ShineError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ShineError::Numeric(_))
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        ShineError::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
