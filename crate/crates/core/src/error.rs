//! Shared error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("outcome column {0:?} not found in header")]
    UnknownColumn(String),

    #[error("cell at row {row}, column {column:?} is not a finite number: {value:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate feature name {0:?}")]
    DuplicateColumn(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("every feature column is constant; nothing to standardize")]
    AllColumnsConstant,

    #[error("empty dataset")]
    EmptyData,

    #[error("every tree has an empty out-of-bag set")]
    EmptyOob,

    #[error("unknown algorithm {0:?} (expected one of {1})")]
    UnknownAlgorithm(String, String),

    #[error("partition {partition}: {source}")]
    Partition {
        partition: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_partition(self, partition: usize) -> Error {
        Error::Partition {
            partition,
            source: Box::new(self),
        }
    }
}
