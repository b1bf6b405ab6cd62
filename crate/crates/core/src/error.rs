use chrono::NaiveDate;

use crate::pspline::Diagnostics;

/// Errors produced across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("row {row}: cannot parse date {value:?}")]
    DateParse { row: usize, value: String },

    #[error("out of range: {0}")]
    Range(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("sampler did not converge ({})", .0.summary())]
    NonConvergence(Box<Diagnostics>),

    #[error("particle filter degenerate on day {day} ({date}): every particle has zero likelihood")]
    Degenerate { day: usize, date: NaiveDate },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
