//! Error types shared across the crate.
//!
//! Every error maps onto one of three classes so the CLI can honor its
//! exit-code contract: data errors (1), parameter errors (2), and
//! infeasibility (3).

use thiserror::Error;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or inconsistent input data.
    Data,
    /// Invalid configuration or argument.
    Parameter,
    /// The requested partition or derivation cannot exist for this input.
    Infeasible,
}

#[derive(Debug, Error)]
pub enum UepError {
    #[error("point {index} of image {image_id} at ({x}, {y}) lies outside {width}x{height}")]
    PointOutOfBounds {
        image_id: String,
        index: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("infeasible partition: need {needed} {what}, found {available}")]
    InfeasiblePartition {
        needed: usize,
        available: usize,
        what: &'static str,
    },

    #[error("bisection did not reach tolerance {tolerance} after {iterations} iterations (gap {gap})")]
    SearchDiverged {
        iterations: u32,
        tolerance: f64,
        gap: f64,
    },

    #[error("borders {left} and {right} at positions {left_index} and {right_index} do not ascend strictly")]
    BorderCollision {
        left: f64,
        right: f64,
        left_index: usize,
        right_index: usize,
    },

    #[error("negative count {value} at cell {index} of image {image_id}")]
    NegativeCount {
        image_id: String,
        index: usize,
        value: f64,
    },

    #[error("class {value} at cell {index} of image {image_id} is out of range for {classes} classes")]
    ClassOutOfRange {
        image_id: String,
        index: usize,
        value: u16,
        classes: usize,
    },

    #[error("shape mismatch: {message}")]
    ShapeMismatch { message: String },

    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error("unsupported format {found:?}, this reader handles {expected:?}")]
    VersionMismatch { found: String, expected: String },

    #[error("missing file referenced by manifest: {0}")]
    MissingFile(String),

    #[error("proxy table is not monotone: class {index} has proxy {value} below {previous}")]
    NonMonotoneProxies {
        index: usize,
        value: f64,
        previous: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl UepError {
    /// Classify for the exit-code contract.
    pub fn class(&self) -> ErrorClass {
        use UepError::*;
        match self {
            InvalidParameter { .. } | SearchDiverged { .. } => ErrorClass::Parameter,
            InfeasiblePartition { .. } | BorderCollision { .. } => ErrorClass::Infeasible,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, UepError>;
