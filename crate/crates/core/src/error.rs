use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("rotation plane needs two distinct indices, got ({0}, {0})")]
    DegeneratePlane(usize),

    #[error("kernel matrix not PSD (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("no shared observed attributes between rows {0} and {1}")]
    NoSharedAttributes(usize, usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pair selection needs at least two active indices")]
    TooFewActive,

    #[error("negative diagonal entry {value:e} at index {index}")]
    NegativeDiagonal { index: usize, value: f64 },

    #[error("level {level} exceeds stop level {max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error(
        "decomposition stopped early; requested cut unreachable \
         ({requested} clusters requested, minimum achievable is {minimum})"
    )]
    CutUnreachable { requested: usize, minimum: usize },

    #[error("{requested} clusters requested but only {available} items")]
    TooManyClusters { requested: usize, available: usize },

    #[error("sample size {requested} exceeds population {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("kmeans requires complete data")]
    MissingData,

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
