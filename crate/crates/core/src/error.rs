use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the clustering toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic number {found:#010x} in {path} (expected {expected:#010x})")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated file {path}: {detail}")]
    Truncated { path: PathBuf, detail: String },

    #[error("item counts disagree: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("ragged row {row} in {path}: expected {expected} cells, found {found}")]
    Ragged {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-numeric cell {cell:?} at row {row}, column {column} in {path}")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("model file format version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
