//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad hours, fractions, levels, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// CSV ingestion failure with a 1-based data-row number where known.
    #[error("csv error at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    /// Data contract violation (short series, empty partitions, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Tensor or parameter shape mismatch.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Requested quantile level is not available.
    #[error("quantile level error: {0}")]
    Level(String),

    /// Calibration fitted on rows outside the cal_fit partition.
    #[error("calibration leakage: {0}")]
    Leakage(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Checkpoint or artifact format problem.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv file error: {0}")]
    CsvFile(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than runtime
    /// failure; the CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Csv { .. }
                | Error::CsvFile(_)
                | Error::Shape(_)
                | Error::Level(_)
        )
    }
}
