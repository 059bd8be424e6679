use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use crate::api::{ErrorBody, TopicStatus, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unsupported schema_version {0}, this server speaks {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{message}")]
    Conflict {
        code: &'static str,
        message: String,
        status: Option<Box<TopicStatus>>,
    },
    #[error("missing or wrong bearer token")]
    Unauthorized,
    #[error("event log {path}: {message}")]
    Replay { path: String, message: String },
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn conflict(code: &'static str, message: impl Into<String>, status: Option<TopicStatus>) -> Self {
        ServiceError::Conflict {
            code,
            message: message.into(),
            status: status.map(Box::new),
        }
    }

    fn code(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::SchemaVersion(_) => (StatusCode::BAD_REQUEST, "schema_version"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Unprocessable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_grade"),
            ServiceError::Conflict { code, .. } => (StatusCode::CONFLICT, code),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::Replay { .. } | ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (code, error) = self.code();
        let message = self.to_string();
        let status = match self {
            ServiceError::Conflict { status, .. } => status.map(|s| *s),
            _ => None,
        };
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: error.to_owned(),
            message,
            status,
        };
        (code, Json(body)).into_response()
    }
}
