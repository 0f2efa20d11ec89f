use std::path::PathBuf;

use thiserror::Error;

use crate::detectors::CnnModel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("division by zero in reference grid at subcarrier {k}, symbol {n}")]
    DivisionByZero { k: usize, n: usize },

    #[error("region of interest out of bounds: {0}")]
    Bounds(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// Training produced a non-finite loss. Carries the last model whose
    /// parameters were all finite.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Divergence {
        epoch: usize,
        batch: usize,
        last_good: Box<CnnModel>,
    },

    #[error("dataset schema version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("records blob truncated while reading record {record}")]
    Truncated { record: usize },

    #[error("manifest shape is inconsistent with stored data: {0}")]
    ShapeMismatch(String),

    #[error("{stage}: {inner}")]
    Stage { stage: &'static str, inner: Box<Error> },

    #[error("i/o error on {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            inner: Box::new(self),
        }
    }
}
