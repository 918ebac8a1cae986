use axum::extract::rejection::{BytesRejection, JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;
use stsem_core::session::SessionError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    /// Current revision, reported with conflicts so clients can refetch.
    pub revision: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            revision: None,
        }
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_request", message)
    }

    pub fn conflict(expected: u64, current: u64) -> Self {
        Self {
            revision: Some(current),
            ..Self::new(
                StatusCode::CONFLICT,
                "conflict",
                format!("revision {expected} is stale; current revision is {current}"),
            )
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"error": self.code, "message": self.message});
        if let Some(r) = self.revision {
            body["revision"] = r.into();
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::UnknownGraph(id) => {
                Self::not_found("graph_not_found", format!("graph `{id}` is not in the corpus"))
            }
            SessionError::CorpusMismatch { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "corpus_mismatch", e.to_string())
            }
            SessionError::Snapshot(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_snapshot", e.to_string())
            }
            SessionError::Config(_) => Self::invalid(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::invalid(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::invalid(e.body_text())
    }
}

impl From<BytesRejection> for ApiError {
    fn from(e: BytesRejection) -> Self {
        Self::invalid(e.body_text())
    }
}
