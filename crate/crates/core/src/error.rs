use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, learning updates, simulators, and
/// the experiment harness.
///
/// Numerical guards (`ShapeMismatch`, `NonFinite`) are checked eagerly so a
/// bad update is rejected before it can poison a model; harness-level
/// failures carry enough context to diagnose a run from its logs.
#[derive(Debug, Error)]
pub enum Error {
    /// Two containers that must agree in length (or a matrix and a vector
    /// that must be conformable) do not.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A NaN or infinity showed up where only finite values are allowed.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// An argument violates a documented precondition (empty pool, duplicate
    /// item ids, probability outside `[0, 1]`, `k` larger than the pool, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A statistic is undefined for the given inputs (fewer than two samples,
    /// zero variance, no relevant items, ...).
    #[error("degenerate statistics: {0}")]
    DegenerateStatistics(String),

    /// Synthetic dataset generation could not satisfy its post-conditions.
    #[error("dataset generation failed: {0}")]
    DatasetGeneration(String),

    /// A configuration file could not be parsed or is missing a section.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}
