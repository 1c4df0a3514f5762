//! Error type shared by all core modules.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SkmError>;

/// Everything that can go wrong in the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SkmError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,

    #[error("non-finite entry at column {col}, row {row}")]
    NonFiniteEntry { col: usize, row: usize },

    #[error("column index {col} out of range for {n} columns")]
    ColumnOutOfRange { col: usize, n: usize },

    #[error("row index {row} out of range for {d} rows")]
    RowOutOfRange { row: usize, d: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cannot sample from an all-zero weight vector ({what})")]
    DegenerateDistribution { what: String },

    #[error("weight at index {index} must be finite and nonnegative")]
    InvalidWeight { index: usize },

    #[error("power iteration did not converge within {iters} iterations")]
    PowerIterationStall { iters: usize },

    #[error("centroid {cluster} contains a non-finite coordinate")]
    NonFiniteCentroid { cluster: usize },

    #[error("tau must be positive and finite, got {tau}")]
    InvalidTau { tau: f64 },

    #[error("delta must lie in (0, 1), got {delta}")]
    InvalidDelta { delta: f64 },

    #[error("invalid iteration parameters: {reason}")]
    InvalidParams { reason: String },

    #[error("k = {k} exceeds the number of points n = {n}")]
    KTooLarge { k: usize, n: usize },

    #[error("invalid instance shape: {reason}")]
    InvalidShape { reason: String },

    #[error("l1 mass {l1} exceeds the stated budget {budget}")]
    BudgetViolated { l1: f64, budget: f64 },

    #[error("tau is required for the sampled-assignment cost rows")]
    MissingTau,
}
