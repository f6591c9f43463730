use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("k = {k} exceeds the attribute count n = {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("{n} attributes exceed the supported maximum of {max}")]
    TooManyAttributes { n: usize, max: usize },

    #[error("invalid term: {0}")]
    InvalidTerm(String),

    #[error("term enumeration of {0} terms is too large")]
    TooManyTerms(u128),

    #[error("parameters out of desk-scale range: {0}")]
    SampleSizeOverflow(String),

    #[error("no example satisfies the condition; conditional error is undefined")]
    EmptyConditioned,

    #[error("target condition mass {target} is unreachable (attainable range [{lo}, {hi}])")]
    MuUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("generator self-check failed: {0}")]
    GeneratorSelfCheck(String),

    #[error("malformed CSV at line {line}, column {column}: {reason}")]
    Csv {
        line: u64,
        column: usize,
        reason: String,
    },

    #[error("malformed model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
