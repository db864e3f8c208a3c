use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gesture_core::api::ErrorBody;
use gesture_core::config::ConfigError;
use gesture_core::dataset::DatasetError;
use gesture_core::engine::EngineError;
use gesture_core::features::FeatureError;
use gesture_core::harness::HarnessError;
use gesture_core::models::ModelError;
use gesture_core::segment::SegmentError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no {what} with id {id}"))
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, "{}", self.message);
        }
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

impl From<ConfigError> for ApiError {
    fn from(e: ConfigError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl From<HarnessError> for ApiError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Invalid(_) => Self::bad_request(e.to_string()),
            HarnessError::Output { .. } => Self::internal(e.to_string()),
            _ => Self::unprocessable(e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Finished => Self::new(StatusCode::CONFLICT, e.to_string()),
            _ => Self::unprocessable(e.to_string()),
        }
    }
}

macro_rules! unprocessable_from {
    ($($t:ty),*) => {
        $(impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                Self::unprocessable(e.to_string())
            }
        })*
    };
}

unprocessable_from!(ModelError, FeatureError, SegmentError, DatasetError);

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self::internal(format!("worker task failed: {e}"))
    }
}
