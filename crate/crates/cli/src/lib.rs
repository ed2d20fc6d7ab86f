//! Experiment runner for the netwaves toolkit: JSON configs, seeded
//! commands, CSV outputs with run manifests, and the acceptance suite.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod verify;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{failed} of {total} acceptance criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
    #[error(transparent)]
    Model(#[from] netwaves::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration and parameter errors, 3 for criterion failures,
    /// 1 for anything else (numerical or I/O failures).
    pub fn exit_code(&self) -> i32 {
        use netwaves::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::CriteriaFailed { .. } => 3,
            CliError::Model(
                E::InvalidParameter { .. }
                | E::NonNormalizableTail(_)
                | E::TooManySuppliers { .. }
                | E::Ingest { .. }
                | E::ZeroColumn { .. }
                | E::InvalidNetwork(_)
                | E::Reducible { .. }
                | E::Domain { .. }
                | E::ComplexTransient { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
