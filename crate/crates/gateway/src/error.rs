use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use immerflow_core::dataflow::DataflowError;
use immerflow_core::sensor::SensorKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("bad credentials")]
    BadCredentials,
    #[error("device `{0}` is already connected")]
    AlreadyConnected(String),
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("{kind} stream of `{device_key}` is already open")]
    StreamAlreadyOpen { device_key: String, kind: SensorKind },
    #[error("unknown workspace `{0}`")]
    UnknownWorkspace(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("stale save: stored version {stored}, document version {given}")]
    ConflictingVersion { stored: u64, given: u64 },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("internal: {0}")]
    Internal(String),
}

impl GatewayError {
    /// Stable machine-readable name, also used by clients to map errors back.
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownDevice(_) => "UnknownDevice",
            GatewayError::BadCredentials => "BadCredentials",
            GatewayError::AlreadyConnected(_) => "AlreadyConnected",
            GatewayError::MalformedSpec(_) => "MalformedSpec",
            GatewayError::StreamAlreadyOpen { .. } => "StreamAlreadyOpen",
            GatewayError::UnknownWorkspace(_) => "UnknownWorkspace",
            GatewayError::UnknownNode(_) => "UnknownNode",
            GatewayError::ConflictingVersion { .. } => "ConflictingVersion",
            GatewayError::InvalidDocument(_) => "InvalidDocument",
            GatewayError::BadRequest(_) => "BadRequest",
            GatewayError::NotFound(_) => "NotFound",
            GatewayError::Internal(_) => "Internal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            GatewayError::UnknownDevice(_)
            | GatewayError::UnknownWorkspace(_)
            | GatewayError::UnknownNode(_)
            | GatewayError::NotFound(_) => StatusCode::NOT_FOUND,
            GatewayError::BadCredentials => StatusCode::UNAUTHORIZED,
            GatewayError::AlreadyConnected(_)
            | GatewayError::StreamAlreadyOpen { .. }
            | GatewayError::ConflictingVersion { .. } => StatusCode::CONFLICT,
            GatewayError::MalformedSpec(_)
            | GatewayError::InvalidDocument(_)
            | GatewayError::BadRequest(_) => StatusCode::BAD_REQUEST,
            GatewayError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<DataflowError> for GatewayError {
    fn from(e: DataflowError) -> Self {
        match e {
            DataflowError::UnknownNode(id) => GatewayError::UnknownNode(id),
            other => GatewayError::InvalidDocument(other.to_string()),
        }
    }
}

impl From<std::io::Error> for GatewayError {
    fn from(e: std::io::Error) -> Self {
        GatewayError::Internal(e.to_string())
    }
}

/// JSON body of every error response.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
