use thiserror::Error;

/// Errors produced by fitting, selection and classification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left:?} vs {right:?}")]
    GridMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series diverges: smoothness order k = {k} must exceed m/2 for m = {m}")]
    DivergentSeries { k: u32, m: usize },

    #[error("no data rows")]
    NoDataRows,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("point {index} lies outside the open unit cube: {point:?}")]
    OutsideDomain { index: usize, point: Vec<f64> },

    #[error("gradient descent diverged with learning rate {learning_rate:e} (stability bound {bound:e})")]
    Divergence { learning_rate: f64, bound: f64 },

    #[error("at lambda = {lambda:e}: {source}")]
    AtLambda {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("anchor cell {0:?} is outside the grid")]
    AnchorOutOfRange(Vec<usize>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
