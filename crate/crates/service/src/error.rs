use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use sensiloop_core::Error;
use serde_json::json;

use crate::SCHEMA_VERSION;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub revision: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), revision: None }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    pub fn conflict() -> Self {
        ApiError::new(StatusCode::CONFLICT, "conflict", "another change to this session is in progress")
    }

    pub fn at(mut self, revision: u64) -> Self {
        self.revision = Some(revision);
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::Precondition(_) => (StatusCode::UNPROCESSABLE_ENTITY, "precondition"),
            Error::InvalidInput(_)
            | Error::UnknownFeature(_)
            | Error::FingerprintMismatch(_)
            | Error::Domain(_)
            | Error::Empty(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid"),
            Error::Csv(_) | Error::Json(_) | Error::Format(_) | Error::Version { .. } | Error::Checksum => {
                (StatusCode::BAD_REQUEST, "malformed")
            }
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "schema_version": SCHEMA_VERSION,
            "revision": self.revision,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}
