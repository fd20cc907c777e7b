use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited input: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}, column '{column}': cannot parse '{value}' as a finite number")]
    InvalidCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}: unknown label '{value}' in column '{column}'")]
    UnknownLabel {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column '{0}' not found in header")]
    MissingColumn(String),

    #[error("no data: {0}")]
    Empty(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class {class} has {count} instance(s); at least {required} needed to stratify")]
    CannotStratify {
        class: u8,
        count: usize,
        required: usize,
    },

    #[error("minority class is empty; nothing to oversample")]
    EmptyMinority,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("no kernel candidate could be fit")]
    NoViableKernel,

    #[error("class counts are all zero")]
    ZeroCounts,

    #[error("input has zero variance in every direction")]
    ZeroVariance,

    #[error("label vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("leakage guard tripped: {0}")]
    Leakage(String),

    #[error("cannot parse config: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
