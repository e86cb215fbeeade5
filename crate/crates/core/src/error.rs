use thiserror::Error;

/// Errors raised by the decompositions, attacks, oracles and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("rank mismatch: expected rank {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },

    #[error("no attack regime applies: {0}")]
    Regime(String),

    #[error("no direction orthogonal to the column space exists (d = n = {0})")]
    NoOrthogonalComplement(usize),

    #[error("singular value decomposition did not converge")]
    NoConvergence,

    #[error("regression normal equations are singular")]
    SingularFit,

    #[error("r-squared is undefined for constant targets")]
    UndefinedR2,

    #[error("oracle too expensive: {0}")]
    OracleTooExpensive(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
