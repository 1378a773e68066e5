use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("could not place {requested} non-overlapping obstacles for map cell {cell} (placed {placed})")]
    PlacementFailure {
        cell: String,
        placed: usize,
        requested: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed map file: {0}")]
    MapFormat(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("regression design matrix is rank deficient")]
    RankDeficient,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
