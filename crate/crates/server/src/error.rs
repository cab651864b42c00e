use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use styleprobe::Error as CoreError;

/// Wire form of every error: `{"code": ..., "message": ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

pub type ApiResult<T> = Result<T, ApiError>;

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("unknown {what} `{id}`"),
        )
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::UnknownScenario(_) | CoreError::UnknownAttribute(_) => {
                Self::new(StatusCode::NOT_FOUND, "not_found", message)
            }
            CoreError::SingleClass | CoreError::EmptyDataset => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "single_class", message)
            }
            CoreError::Codec(_) => Self::new(StatusCode::BAD_REQUEST, "undecodable_image", message),
            CoreError::Cancelled => Self::new(StatusCode::CONFLICT, "cancelled", message),
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Format(_) | CoreError::Config(_) => {
                Self::internal(message)
            }
            CoreError::DimensionMismatch { .. }
            | CoreError::OutOfDomain(_)
            | CoreError::InvalidArgument(_) => Self::bad_request(message),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorEnvelope {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
