//! The JSON error body shared by every non-2xx response.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use skillnet_core::evaluation::sandbox::SandboxError;
use skillnet_core::evaluation::EvaluationError;
use skillnet_core::repository::RepositoryError;
use skillnet_core::search::SearchError;
use skillnet_core::store::StoreError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn unknown_skill(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSkill", format!("unknown skill `{id}`"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<RepositoryError> for ApiError {
    fn from(e: RepositoryError) -> Self {
        let message = e.to_string();
        match e {
            RepositoryError::Store(StoreError::UnknownSkill(id)) => ApiError::unknown_skill(&id),
            RepositoryError::Store(StoreError::Duplicate { existing_id }) => {
                ApiError::new(StatusCode::CONFLICT, "Duplicate", message)
                    .with_details(serde_json::json!({ "existing_id": existing_id }))
            }
            RepositoryError::Search(SearchError::EmptyQuery) => ApiError::bad_request("EmptyQuery", message),
            RepositoryError::Search(SearchError::InvalidTopK) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidTopK", message)
            }
            RepositoryError::Search(SearchError::Provider(_)) | RepositoryError::Provider(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ProviderUnavailable", message)
            }
            RepositoryError::Evaluation(EvaluationError::Sandbox(SandboxError::Unavailable(_))) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "SandboxUnavailable", message)
            }
            RepositoryError::Evaluation(EvaluationError::Provider(_)) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ProviderUnavailable", message)
            }
            _ => {
                tracing::error!(error = %message, "request failed");
                ApiError::internal(message)
            }
        }
    }
}
