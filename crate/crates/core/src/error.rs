use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cone structure: {0}")]
    InvalidStructure(String),

    #[error("cone structures differ")]
    StructureMismatch,

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{which} left the cone interior at block {block} (lambda_min = {lambda_min:e})")]
    NotInterior {
        which: &'static str,
        block: usize,
        lambda_min: f64,
    },

    #[error("noisy step with delta = {delta:e} left the cone interior: {source}")]
    NoisyStepNotInterior {
        delta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("Newton matrix is singular or numerically rank deficient (smallest pivot {pivot:e})")]
    Singular { pivot: f64 },

    #[error("matrix is identically zero")]
    ZeroMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cost is undefined: {0}")]
    UndefinedCost(&'static str),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
