use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got} in {context}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("class index {class} out of range (known classes: {known})")]
    UnknownClass { class: usize, known: usize },

    #[error("{context}: input must not be empty")]
    EmptyInput { context: &'static str },

    #[error("invalid input for {context}: {reason}")]
    InvalidInput { context: &'static str, reason: String },

    #[error("required dataset file missing: {path}")]
    MissingFile { path: PathBuf },

    #[error("dimension mismatch in {path}: {reason}")]
    DimensionMismatch { path: PathBuf, reason: String },

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("split overlap: {reason}")]
    SplitOverlap { reason: String },

    #[error("invalid split: {reason}")]
    InvalidSplit { reason: String },

    #[error("synthetic generation failed: {reason}")]
    Generation { reason: String },

    #[error("checkpoint error in {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
