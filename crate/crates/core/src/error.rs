use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("rate of user {user} is zero; utility is undefined there")]
    ZeroRate { user: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate channel: {0}")]
    Degenerate(String),

    #[error("targets are infeasible (spectral radius {rho:.6} >= 1)")]
    Infeasible { rho: f64 },

    #[error("user {user} cannot meet its target: {reason}")]
    UserInfeasible { user: usize, reason: String },

    #[error("utility `{0}` is not smooth and cannot be used by this solver")]
    NonSmooth(String),

    #[error("unsupported problem size: {0}")]
    Capability(String),

    #[error("invalid channel document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
