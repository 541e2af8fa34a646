use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, parameter or configuration. Carries every violated constraint.
    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// Non-finite coefficients or runaway energy. `t` is the last time with a valid state.
    #[error("numerical blow-up after t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
