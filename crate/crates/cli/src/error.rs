//! Command failures and their exit codes.

use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OPERATIONAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or arguments, detected before any side effect.
    #[error("{0}")]
    Usage(String),
    /// The command ran and failed: store, network, provider or a refused
    /// request.
    #[error("{message}")]
    Operational {
        code: String,
        message: String,
        details: Option<Value>,
    },
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn op(code: &str, message: impl Into<String>) -> Self {
        CliError::Operational {
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Operational { .. } => EXIT_OPERATIONAL,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Operational { code, .. } => code,
        }
    }

    /// `{"error": {"code", "message", "details"?}}`.
    pub fn to_json(&self) -> Value {
        let mut error = json!({ "code": self.code(), "message": self.to_string() });
        if let CliError::Operational { details: Some(details), .. } = self {
            error["details"] = details.clone();
        }
        json!({ "error": error })
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::op("Io", e.to_string())
    }
}

impl From<skillnet_core::skill::SkillError> for CliError {
    fn from(e: skillnet_core::skill::SkillError) -> Self {
        CliError::op("InvalidPackage", e.to_string())
    }
}

impl From<skillnet_core::repository::RepositoryError> for CliError {
    fn from(e: skillnet_core::repository::RepositoryError) -> Self {
        CliError::from(skillnet_registry::ApiError::from(e))
    }
}

impl From<skillnet_registry::ApiError> for CliError {
    fn from(api: skillnet_registry::ApiError) -> Self {
        CliError::Operational {
            code: api.code,
            message: api.message,
            details: api.details,
        }
    }
}
