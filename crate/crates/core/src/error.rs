use thiserror::Error;

/// Errors shared across the library.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tensor entry ({i}, {j}, {l}) out of range for n = {n}")]
    IndexOutOfRange { i: usize, j: usize, l: usize, n: usize },

    #[error("non-finite value at entry ({i}, {j}, {l})")]
    NonFiniteEntry { i: usize, j: usize, l: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("grammar error: {0}")]
    Grammar(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
