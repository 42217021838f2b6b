use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad index, dimension, or parameter passed by the caller.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    /// The Riemann normalization of the kernel vanishes for this particle count.
    #[error("degenerate normalization: {0}")]
    Degenerate(String),

    #[error("solver instability: {0}")]
    SolverInstability(String),

    #[error("state space too large: {states} states (limit {limit})")]
    StateSpaceTooLarge { states: usize, limit: usize },

    #[error("no kinetic snapshot covers t = {0}")]
    MissingSnapshot(f64),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
