use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("point {0:?} lies outside the unit cube")]
    OutOfDomain(Vec<f64>),

    #[error("unknown objective `{0}`")]
    UnknownObjective(String),

    #[error("objective `{name}` does not support dimension {dim}")]
    UnsupportedDimension { name: String, dim: usize },

    #[error("non-finite evaluation: {0}")]
    Evaluation(String),

    #[error("budget error: {0}")]
    Budget(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("density is identically zero")]
    DegenerateDensity,

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("hyperparameter fit failed: every candidate was rejected")]
    FitFailed,

    #[error("bump-class spec error: {0}")]
    Spec(String),

    #[error("delta-Z bounds need d <= 3, got d = {0}")]
    BoundInapplicable(usize),

    #[error("plan error: {0}")]
    Plan(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
