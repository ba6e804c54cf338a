//! Error type shared across the engine.

/// Errors produced by the engine.
///
/// The CLI maps these onto exit codes: `Config` is a usage/configuration
/// problem (exit 1); everything else is a data or integrity problem (exit 2).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor or layer shape mismatch.
    #[error("shape error: {0}")]
    Shape(String),

    /// Invalid configuration value (learning rate, dropout rate, fractions, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Dataset ingestion failure (missing class directory, empty dataset, bad image).
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// Mismatched model/trace state passed across operations.
    #[error("state error: {0}")]
    State(String),

    /// Out-of-range coordinate or label.
    #[error("index error: {0}")]
    Index(String),

    /// Model file failed an integrity check (magic, version, checksum, shapes).
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
