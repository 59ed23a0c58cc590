use std::collections::BTreeMap;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use screening_core::Error;
use serde::Serialize;

/// Every non-2xx response carries this body.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: String,
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                fields: BTreeMap::new(),
            },
        }
    }

    pub fn field(
        status: StatusCode,
        error: impl Into<String>,
        field: &str,
        detail: impl Into<String>,
    ) -> Self {
        let mut e = Self::new(status, error);
        e.body.fields.insert(field.to_string(), detail.into());
        e
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token")
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match &err {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Validation { .. } | Error::Config(_) | Error::InvalidInput(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            Error::Stage { .. } | Error::Backend(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let fields = match &err {
            Error::Validation { fields, .. } => fields.clone(),
            _ => BTreeMap::new(),
        };
        Self {
            status,
            body: ErrorBody {
                error: err.to_string(),
                fields,
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, error = %self.body.error, "request failed");
        }
        (self.status, Json(self.body)).into_response()
    }
}
