use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("moment order must be a positive even integer, got {0}")]
    InvalidOrder(u32),
    #[error("invalid {what}: {detail}")]
    InvalidInput { what: &'static str, detail: String },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("product space has {atoms} atoms before merging, cap is {cap}")]
    ProductSpaceTooLarge { atoms: u128, cap: u128 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("matrix is numerically singular at {precision} bits")]
    Singular { precision: u32 },
    #[error("newton iteration failed for j = {j}: {reason}")]
    ContinuationFailure { j: u64, reason: String },
    #[error("no admissible solution: {0}")]
    NoSolution(String),
    #[error("infeasible mass {0} (must lie in (0, 1])")]
    InfeasibleMass(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot parse number {0:?}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            detail: detail.into(),
        }
    }
}
