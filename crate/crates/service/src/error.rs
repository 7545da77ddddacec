use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fuzzdx_core::extraction::ExtractionError;
use fuzzdx_core::kb::KbError;
use fuzzdx_core::ranking::RankingError;
use serde::{Deserialize, Serialize};

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { error: self.kind.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<RankingError> for ApiError {
    fn from(e: RankingError) -> Self {
        let message = e.to_string();
        match e {
            RankingError::EmptyCase | RankingError::EmptySymptomSet => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_case", message)
            }
            RankingError::MissingPrior(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_prior", message),
            RankingError::InvalidInput(_) | RankingError::LengthMismatch { .. } | RankingError::EmptySet => {
                Self::bad_request(message)
            }
            RankingError::Extraction(ExtractionError::Remote(_)) => {
                Self::new(StatusCode::BAD_GATEWAY, "extractor", message)
            }
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl From<KbError> for ApiError {
    fn from(e: KbError) -> Self {
        let message = e.to_string();
        match e {
            KbError::StaleVersion { .. } => Self::new(StatusCode::CONFLICT, "stale_version", message),
            KbError::MissingSnapshot(_) => Self::new(StatusCode::NOT_FOUND, "missing_snapshot", message),
            KbError::VersionOrder { .. } => Self::bad_request(message),
            KbError::ConsistencyViolation { .. }
            | KbError::UnknownRuleId(_)
            | KbError::Parse(_)
            | KbError::Lexicon(_)
            | KbError::Learning(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "consistency_violation", message),
            KbError::Ranking(r) => r.into(),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}
