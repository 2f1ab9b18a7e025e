use std::collections::BTreeMap;

use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;
use serde_json::{json, Value};
use tutorgraph_core::engine::EngineError;
use tutorgraph_core::fragment::FragmentError;
use tutorgraph_core::gamification::RulePackError;
use tutorgraph_core::planner::{PlanError, RefineError};

use crate::store::StoreError;

/// Every error code the API can return, with its HTTP status and meaning.
pub const ERROR_CODES: &[(&str, u16, &str)] = &[
    ("MALFORMED_DOCUMENT", 400, "request body is not well-formed JSON"),
    ("INVALID_ID", 400, "id contains characters outside [A-Za-z0-9_.-] or is empty"),
    ("INVALID_QUERY", 400, "query string could not be parsed"),
    ("ID_MISMATCH", 400, "document id differs from the id in the path"),
    ("UNAUTHORIZED", 401, "missing or wrong bearer token"),
    ("NOT_FOUND", 404, "no such document or route"),
    ("VERSION_CONFLICT", 409, "that id and version already hold different content"),
    ("SESSION_NOT_ACTIVE", 409, "the session has already completed or failed"),
    ("CONCURRENT_SUBMISSION", 409, "another submission for the session is in progress"),
    ("SCHEMA_VIOLATION", 422, "body is JSON but not a valid document of its type"),
    ("INVALID_FRAGMENT", 422, "fragment fails validation; detail carries the report"),
    ("INVALID_CATALOG", 422, "catalog entries are inconsistent"),
    ("INVALID_RULEPACK", 422, "rule pack is inconsistent"),
    ("PLAN_FAILED", 422, "no plan satisfies the goal"),
    ("REFINEMENT_FAILED", 422, "an abstract node could not be refined"),
    ("CAPABILITY_MISMATCH", 422, "declared capabilities cannot render some node"),
    ("KIND_MISMATCH", 422, "submission kind differs from the current activity"),
    ("SHAPE_MISMATCH", 422, "submission does not fit the activity's shape"),
    ("INTERNAL_ERROR", 500, "storage failure or corrupted stored document"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: BTreeMap<String, Value>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
    detail: &'a BTreeMap<String, Value>,
}

impl ApiError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        let status = ERROR_CODES
            .iter()
            .find(|(c, _, _)| *c == code)
            .map(|(_, s, _)| StatusCode::from_u16(*s).expect("table statuses are valid"))
            .unwrap_or_else(|| panic!("error code {code} is not in the table"));
        ApiError {
            status,
            code,
            message: message.into(),
            detail: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.detail.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn internal(message: impl Into<String>) -> Self {
        let message = message.into();
        tracing::error!(%message, "internal error");
        ApiError::new("INTERNAL_ERROR", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = crate::api::canonical(&ErrorBody {
            code: self.code,
            message: &self.message,
            detail: &self.detail,
        });
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::NotFound {
                collection,
                id,
                version,
            } => ApiError::new("NOT_FOUND", e.to_string())
                .with("collection", collection)
                .with("id", id)
                .with("version", version),
            StoreError::VersionConflict {
                collection,
                id,
                version,
            } => ApiError::new("VERSION_CONFLICT", e.to_string())
                .with("collection", collection)
                .with("id", id)
                .with("version", version),
            StoreError::InvalidId(id) => ApiError::new("INVALID_ID", e.to_string()).with("id", id),
            StoreError::Io(_) => ApiError::internal(e.to_string()),
        }
    }
}

impl From<FragmentError> for ApiError {
    fn from(e: FragmentError) -> Self {
        match &e {
            FragmentError::MalformedDocument { line, column, .. } => {
                ApiError::new("MALFORMED_DOCUMENT", e.to_string())
                    .with("line", line)
                    .with("column", column)
            }
            FragmentError::SchemaViolation(_) => ApiError::new("SCHEMA_VIOLATION", e.to_string()),
            FragmentError::UnknownNode(node) => ApiError::new("NOT_FOUND", e.to_string()).with("node", node),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::InvalidFragment(report) => {
                ApiError::new("INVALID_FRAGMENT", e.to_string()).with("report", report)
            }
            EngineError::CapabilityMismatch(missing) => {
                ApiError::new("CAPABILITY_MISMATCH", e.to_string()).with("missing", missing)
            }
            EngineError::SessionNotActive => ApiError::new("SESSION_NOT_ACTIVE", e.to_string()),
            EngineError::KindMismatch { expected, found } => {
                ApiError::new("KIND_MISMATCH", e.to_string())
                    .with("expected", expected)
                    .with("found", found)
            }
            EngineError::ShapeMismatch(_) => ApiError::new("SHAPE_MISMATCH", e.to_string()),
            // The service refines before starting, binds each session to
            // its own engine, and only runs type-checked conditions.
            EngineError::UnrefinedFragment(_)
            | EngineError::WrongFragment { .. }
            | EngineError::Condition { .. } => ApiError::internal(e.to_string()),
        }
    }
}

impl From<PlanError> for ApiError {
    fn from(e: PlanError) -> Self {
        let error = ApiError::new("PLAN_FAILED", e.to_string());
        match &e {
            PlanError::EmptyGoal => error.with("reason", "EmptyGoal"),
            PlanError::UncoverableGoal { missing } => {
                error.with("reason", "UncoverableGoal").with("missing", missing)
            }
            PlanError::PrerequisiteCycle { fragments } => error
                .with("reason", "PrerequisiteCycle")
                .with("fragments", fragments),
            PlanError::ChainTooLong { length, limit } => error
                .with("reason", "ChainTooLong")
                .with("length", length)
                .with("limit", limit),
            PlanError::InvalidCatalog(_) => ApiError::new("INVALID_CATALOG", e.to_string()),
        }
    }
}

impl From<RefineError> for ApiError {
    fn from(e: RefineError) -> Self {
        let error = ApiError::new("REFINEMENT_FAILED", e.to_string());
        match &e {
            RefineError::Plan { node, source } => {
                let plan = ApiError::from(source.clone());
                error.with("node", node).with("plan", json!({ "message": plan.message, "detail": plan.detail }))
            }
            RefineError::DepthExceeded { node, depth, limit } => error
                .with("node", node)
                .with("depth", depth)
                .with("limit", limit),
            RefineError::MissingFragment { id, version } => {
                error.with("fragment_id", id).with("version", version)
            }
            RefineError::ResultInvalid(_) => error,
        }
    }
}

impl From<RulePackError> for ApiError {
    fn from(e: RulePackError) -> Self {
        ApiError::new("INVALID_RULEPACK", e.to_string())
    }
}
