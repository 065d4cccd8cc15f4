use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation is undefined on the empty forest")]
    EmptyForest,

    #[error("operation is undefined on the empty word")]
    EmptyWord,

    #[error("roughness exponent {0} outside (0, 1]")]
    InvalidGamma(f64),

    #[error("invalid exponent {value}: {reason}")]
    InvalidExponent { value: f64, reason: &'static str },

    #[error("resource limit exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceLimit { what: &'static str, needed: u128, cap: u128 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("rough path stores trees up to degree {have}, degree {need} required")]
    MissingLevel { have: usize, need: usize },

    #[error("vector field has no derivative of order {order}")]
    MissingDerivative { order: usize },

    #[error("Picard iteration did not contract after {splits} window splits")]
    NonContraction { splits: usize },

    #[error("Picard iteration hit the cap of {cap} iterations on window [{from}, {to}]")]
    IterationCap { cap: usize, from: f64, to: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
