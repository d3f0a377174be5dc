//! HTTP error mapping.
//!
//! Every failure leaves the service as `{code, message}` JSON with a status
//! chosen from the library error kind. Messages never echo payload content:
//! a request that failed to parse or carried a bad value is described by
//! position, not by the bytes or numbers it contained.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use emfv_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_request", message)
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", message)
    }

    pub fn network_unavailable() -> Self {
        Self::new(
            StatusCode::NOT_IMPLEMENTED,
            "feature_network_unavailable",
            "this deployment has no trained network; submit feature vectors instead of images",
        )
    }

    /// As [`From<CoreError>`], but statuses that would be 5xx become 400:
    /// the error arose while decoding client-supplied bytes, so it is the
    /// request that is wrong, not the service.
    pub fn from_payload(err: CoreError) -> Self {
        let mut api: ApiError = err.into();
        if api.status.is_server_error() {
            api.status = StatusCode::BAD_REQUEST;
        }
        api
    }
}

impl From<CoreError> for ApiError {
    fn from(err: CoreError) -> Self {
        let status = match &err {
            CoreError::DuplicatePerson(_) | CoreError::BandCollision(_) => StatusCode::CONFLICT,
            CoreError::UnknownPerson(_) => StatusCode::NOT_FOUND,
            CoreError::Dimension { .. }
            | CoreError::InvalidEntry { .. }
            | CoreError::EmptyGallery
            | CoreError::DegenerateVector
            | CoreError::LayerShape(_)
            | CoreError::Label { .. } => StatusCode::BAD_REQUEST,
            CoreError::Io(_)
            | CoreError::Serialization(_)
            | CoreError::Format(_)
            | CoreError::InvariantViolation(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        // InvalidEntry's library message prints the offending value; that is
        // payload content, so the service substitutes a positional message.
        let message = match &err {
            CoreError::InvalidEntry { index, .. } => {
                format!(
                    "entry {index} is not a valid feature value (must be finite and nonnegative)"
                )
            }
            other => other.to_string(),
        };
        Self {
            status,
            code: err.code().into(),
            message,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        tracing::info!(status = %self.status, code = %self.code, "request failed");
        (
            self.status,
            Json(ErrorBody {
                code: &self.code,
                message: &self.message,
            }),
        )
            .into_response()
    }
}
