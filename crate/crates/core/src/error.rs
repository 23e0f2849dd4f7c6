use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("format error at row {row}: {reason}")]
    Format { row: usize, reason: String },

    #[error("parse error at row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },

    #[error("unknown label `{value}` at row {row}")]
    Label { row: usize, value: String },

    #[error("invalid series: {0}")]
    Series(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] CheckpointError),

    #[error("feature error: {0}")]
    Feature(String),

    #[error("mask error: {0}")]
    Mask(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("rule base error: {0}")]
    Rule(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("truncated: {0}")]
    Truncated(String),
    #[error("payload checksum mismatch (header {expected:08x}, payload {found:08x})")]
    Checksum { expected: u32, found: u32 },
    #[error("malformed header: {0}")]
    Header(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short stable category name, used by the command-line front-end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Format { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::Label { .. } => "label",
            Error::Series(_) => "series",
            Error::Split(_) => "split",
            Error::Shape(_) => "shape",
            Error::Training { .. } => "training",
            Error::Checkpoint(_) => "checkpoint",
            Error::Feature(_) => "feature",
            Error::Mask(_) => "mask",
            Error::Report(_) => "report",
            Error::Rule(_) => "rule",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Io(_) => 3,
            Error::Format { .. } | Error::Parse { .. } | Error::Label { .. } | Error::Json(_) => 4,
            Error::Checkpoint(_) => 5,
            Error::Training { .. } => 6,
            _ => 1,
        }
    }
}
