use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two symbol tuples land on the same joint point.
    #[error("collision: tuples {a:?} and {b:?} give the same joint symbol")]
    Collision { a: Vec<usize>, b: Vec<usize> },

    #[error("no injective design found on the offset grid")]
    NoInjectiveDesign,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("refusing to simulate a non-injective design")]
    NonInjectiveDesign,

    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
