use thiserror::Error;

/// Errors raised by the estimation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("column {index} ({name}) has zero root-mean-square and cannot be normalized")]
    DegenerateColumn { index: usize, name: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("enumeration budget exceeded: {count} subsets requested, limit is {limit}{hint}")]
    Budget {
        count: u128,
        limit: u128,
        hint: &'static str,
    },

    #[error("degenerate refit: selected support size {selected} leaves no residual degrees of freedom (n = {n})")]
    DegenerateRefit {
        selected: usize,
        n: usize,
        trace: Vec<f64>,
    },

    #[error(
        "singular Gram matrix on the selected columns; remove duplicated or collinear columns"
    )]
    Singular,

    #[error("bound is non-informative: {0}")]
    NonInformative(String),

    #[error("oracle inconsistency: {0}")]
    OracleInconsistency(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: &'static str, got: usize, expected: usize) -> Self {
        Error::Dimension {
            what,
            got,
            expected,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
