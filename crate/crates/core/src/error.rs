//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A query fell outside a grid axis with clamping disabled, or a grid
    /// does not cover a requested region. Carries the offending axis name.
    #[error("out of bounds on {axis}: {detail}")]
    Bounds { axis: &'static str, detail: String },

    /// Grids do not cover the space/time needed for an operation.
    #[error("coverage gap on {axis}: {detail}")]
    Coverage { axis: &'static str, detail: String },

    /// Malformed input data (sounding rows, interchange payloads, ...).
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    /// An operation received no usable input.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A configuration value violates an invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Structural violation in a data file or in-memory grid.
    #[error("invalid data: {0}")]
    Data(String),

    /// A sounding had too few usable samples for the requested window.
    #[error("station {station}: {detail}")]
    Rejected { station: String, detail: String },

    /// Simulator misuse (e.g. stepping a finished episode).
    #[error("invalid state: {0}")]
    State(String),

    /// Training aborted (non-finite loss and similar).
    #[error("training error: {0}")]
    Training(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
