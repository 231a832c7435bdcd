use crate::agents::{ProviderError, SchemaError};
use crate::model::{Stage, ValidationReport};
use crate::store::StorageError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Engine-level failure. Every variant has a stable machine-readable code
/// shared by the HTTP service, the CLI and the C API.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot work on {stage} before {missing} is confirmed")]
    StageOrder { stage: Stage, missing: Stage },
    #[error("validation failed: {0}")]
    Validation(ValidationReport),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("revision conflict: expected revision {expected}, current revision is {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::StageOrder { .. } => "STAGE_ORDER",
            Error::Validation(_) => "VALIDATION",
            Error::Provider(e) => e.code(),
            Error::Schema(_) => "SCHEMA",
            Error::NotFound(_) => "NOT_FOUND",
            Error::Conflict { .. } => "CONFLICT",
            Error::InvalidRequest(_) => "INVALID_REQUEST",
            Error::Storage(_) => "STORAGE",
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) => 2,
            Error::StageOrder { .. } => 3,
            Error::Provider(_) | Error::Schema(_) => 4,
            Error::Storage(_) => 5,
            Error::NotFound(_) | Error::Conflict { .. } | Error::InvalidRequest(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_cli_contract() {
        let order = Error::StageOrder {
            stage: Stage::Plots,
            missing: Stage::Characters,
        };
        assert_eq!(order.exit_code(), 3);
        assert_eq!(order.code(), "STAGE_ORDER");
        assert_eq!(Error::Validation(ValidationReport::default()).exit_code(), 2);
        assert_eq!(Error::Provider(ProviderError::Auth("bad key".into())).exit_code(), 4);
        assert_eq!(Error::NotFound("x".into()).exit_code(), 1);
    }
}
