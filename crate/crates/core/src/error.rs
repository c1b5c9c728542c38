use thiserror::Error;

use crate::wei::Step;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("placement infeasible: placed {placed} of {requested} after {attempts} attempts")]
    PlacementInfeasible { placed: usize, requested: usize, attempts: usize },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("model spec mismatch: {0}")]
    SpecMismatch(String),

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("non-finite loss{}", step.map(|s| format!(" while training {s}")).unwrap_or_default())]
    NonFiniteLoss { step: Option<Step> },

    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt data at byte offset {offset}: {reason}")]
    Corrupt { offset: u64, reason: String },

    #[error("no pilot ratio reaches the target NMSE for {0}")]
    TargetUnreachable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation problems (bad input) as opposed to runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::PlacementInfeasible { .. }
                | Error::InvalidScene(_)
                | Error::InvalidConfig(_)
                | Error::SpecMismatch(_)
                | Error::VersionMismatch { .. }
                | Error::Json(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::PlacementInfeasible { .. } => "PlacementInfeasible",
            Error::InvalidScene(_) => "InvalidScene",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SpecMismatch(_) => "SpecMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::VersionMismatch { .. } => "VersionMismatch",
            Error::Corrupt { .. } => "Corrupt",
            Error::TargetUnreachable(_) => "TargetUnreachable",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
