use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty point set")]
    EmptyPointSet,

    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid label {label} at index {index}: cluster ids are -1 (noise) or non-negative")]
    InvalidLabel { index: usize, label: i64 },

    #[error("{0}")]
    InvalidLabels(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: u64, expected: usize, found: usize },

    #[error("invalid header: {0}")]
    Header(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cannot place clusters at requested separation")]
    Placement,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("step {step} out of range for {steps} recurrent steps")]
    StepOutOfRange { step: usize, steps: usize },

    #[error("multiscale loss requested but coarse targets are missing")]
    MissingCoarseTargets,

    #[error("missing ground truth: {0}")]
    MissingTruth(&'static str),

    #[error("divergence: non-finite loss on graph {graph}")]
    Divergence { graph: usize },

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn file_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}
