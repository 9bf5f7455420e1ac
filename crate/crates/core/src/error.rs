use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("semitile index {index} out of range 1..={max}")]
    SemitileOutOfRange { index: usize, max: usize },
    #[error("grid mismatch")]
    GridMismatch,
    #[error("tile {tile} is not representable on the grid: {reason}")]
    NotRepresentable { tile: String, reason: String },
    #[error("frequency {zeta:?} is not in the semitile {index} of {tile}")]
    ZetaOutsideSemitile {
        zeta: Vec<f64>,
        index: usize,
        tile: String,
    },
    #[error("multiplier evaluated at the origin inside a packet support")]
    MultiplierSingularity,
    #[error("no admissible tile dominates {0}")]
    NoAdmissibleTile(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("normalization violated: {0}")]
    Normalization(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("descent did not terminate above level {0}")]
    NonTermination(i64),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
