use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema mismatch in {path}: {detail}")]
    Schema { path: String, detail: String },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error(transparent)]
    Core(#[from] topochaos::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    /// 2 for anything the user can fix in the inputs, 3 for oracle failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use topochaos::Error as E;
        match self {
            LabError::Config(_) | LabError::Schema { .. } | LabError::Insufficient(_) | LabError::Json(_) => 2,
            LabError::Oracle(_) => 3,
            LabError::Core(
                E::Domain(_)
                | E::InvalidKernel(_)
                | E::UnknownStrategy { .. }
                | E::Degenerate(_)
                | E::StateSpaceTooLarge { .. }
                | E::Schema(_)
                | E::Json(_),
            ) => 2,
            _ => 1,
        }
    }
}
