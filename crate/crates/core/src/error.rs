use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad error class, used by the command line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Data,
    Config,
    Numerical,
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("series `{0}` has no observed values")]
    UnrecoverableSeries(String),

    #[error("season bucket `{0}` is empty")]
    EmptySeason(String),

    #[error("insufficient history: need at least {required} rows, have {available}")]
    InsufficientHistory { required: usize, available: usize },

    #[error("degenerate lambda grid: {0}")]
    DegenerateGrid(String),

    #[error("degenerate volatility: {0}")]
    DegenerateVolatility(String),

    #[error("rank deficient design in {0}")]
    RankDeficient(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("simulation unstable at row {row}: |value| = {value:e}")]
    Unstable { row: usize, value: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("model file error at line {line}: {message}")]
    ModelFormat { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Model(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) => ErrorKind::Io,
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::UnrecoverableSeries(_)
            | Error::EmptySeason(_)
            | Error::InsufficientHistory { .. }
            | Error::LengthMismatch { .. }
            | Error::ModelFormat { .. } => ErrorKind::Data,
            Error::Parameter(_) | Error::Index { .. } | Error::Config(_) => ErrorKind::Config,
            Error::DegenerateGrid(_)
            | Error::DegenerateVolatility(_)
            | Error::RankDeficient(_)
            | Error::Unstable { .. }
            | Error::NonFinite(_)
            | Error::Model(_) => ErrorKind::Numerical,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                row,
                message: format!("{other:?}"),
            },
        }
    }
}
