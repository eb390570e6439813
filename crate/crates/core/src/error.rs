use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("grid mismatch: {0}")]
    SpecMismatch(String),
    #[error("shell {j} outside the resolvable range [{min}, {max}]")]
    ShellOutOfRange { j: i32, min: i32, max: i32 },
    #[error("grid too coarse: {0}")]
    TooCoarse(String),
    #[error("decay margin violated: relative magnitude {0:e} in the outer margin")]
    MarginViolation(f64),
    #[error("band violation: {0}")]
    BandViolation(String),
    #[error("direct evaluation budget exceeded (m*dim*log2 N = {cost} > {budget}); use apply_spectral or apply_separable")]
    BudgetExceeded { cost: u32, budget: u32 },
    #[error("multiplier has no separable factorization")]
    MissingFactorization,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate construction: {0}")]
    Degenerate(String),
    #[error("point {0} lies in no region")]
    Unclassifiable(String),
    #[error("threshold violated: {0}")]
    Threshold(String),
    #[error("{0} is a base region; no interpolation plan is needed")]
    BaseRegion(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
