use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is rank deficient within tolerance")]
    RankDeficient,

    #[error("{what} = {size} exceeds the limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("vector is zero within tolerance")]
    ZeroVector,

    #[error("null space has dimension {found}, expected {expected}")]
    WrongDimension { expected: usize, found: usize },

    #[error("numerical inconsistency: {0}")]
    NumericalInconsistency(String),

    #[error("certificate ratio {0} is below 1, so it does not witness a recovery failure")]
    NotAWitness(f64),

    #[error("no solution with at most {k_max} nonzeros")]
    NoSolutionWithin { k_max: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line} has {found} entries, expected {expected}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
