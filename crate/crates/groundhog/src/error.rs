//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by geometry, solvers, generators, and I/O plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// Input value violates a precondition (non-finite, wrong size, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A homography violates the trigonometric or structural constraints.
    #[error("invalid homography: {0}")]
    InvalidHomography(String),
    /// The rotation block (h1, h2) vanishes; scale cannot be fixed.
    #[error("degenerate scale: h1 and h2 are both zero")]
    DegenerateScale,
    /// Point/attitude configuration admits no unique minimal solution.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),
    /// Synthetic generation could not satisfy its invariants.
    #[error("generation failure: {0}")]
    GenerationFailure(String),
    /// Malformed input data, with the 1-based line it came from.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Structurally valid input whose values are unusable.
    #[error("data error: {0}")]
    Data(String),
    /// Inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// A robust estimator produced no candidate model at all.
    #[error("no model found: {0}")]
    NoModel(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
