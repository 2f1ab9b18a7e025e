//! Recorded HTTP scripts.
//!
//! A script is a list of requests with the responses recorded on a previous
//! run. Replaying it against a fresh store must reproduce every status and
//! body once minted ids and timestamps are masked: values captured from
//! earlier responses become `{name}` and `created_at`/`updated_at` fields
//! become `<timestamp>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{header, Method, Request};
use axum::Router;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tower::ServiceExt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub name: String,
    pub method: String,
    /// May contain `{name}` placeholders for captured values.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
    /// Request body read verbatim from a file relative to the script root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_file: Option<PathBuf>,
    /// Values to capture from the response, as JSON pointers.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub capture: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    pub status: u16,
    /// Normalized response body.
    pub response: Value,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("step `{step}`: {message}")]
    Step { step: String, message: String },
}

fn step_error(step: &Step, message: impl ToString) -> ReplayError {
    ReplayError::Step {
        step: step.name.clone(),
        message: message.to_string(),
    }
}

/// Masks captured values and timestamps.
pub fn normalize(value: &mut Value, captures: &BTreeMap<String, String>) {
    match value {
        Value::String(s) => {
            if let Some((name, _)) = captures.iter().find(|(_, v)| *v == s) {
                *s = format!("{{{name}}}");
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|v| normalize(v, captures)),
        Value::Object(map) => {
            for (key, v) in map.iter_mut() {
                if matches!(key.as_str(), "created_at" | "updated_at") && v.is_string() {
                    *v = Value::String("<timestamp>".into());
                } else {
                    normalize(v, captures);
                }
            }
        }
        _ => {}
    }
}

/// Runs every step in order against `app`.
pub async fn run_script(app: &Router, script: &Script, root: &Path) -> Result<Vec<Exchange>, ReplayError> {
    run_script_with(app, script, root, &mut BTreeMap::new()).await
}

/// [`run_script`] starting from, and adding to, previously captured values.
pub async fn run_script_with(
    app: &Router,
    script: &Script,
    root: &Path,
    captures: &mut BTreeMap<String, String>,
) -> Result<Vec<Exchange>, ReplayError> {
    let mut out = Vec::new();
    for step in &script.steps {
        let mut path = step.path.clone();
        for (name, value) in captures.iter() {
            path = path.replace(&format!("{{{name}}}"), value);
        }
        let body = match (&step.body, &step.body_file) {
            (Some(v), _) => serde_json::to_vec(v).map_err(|e| step_error(step, e))?,
            (None, Some(file)) => std::fs::read(root.join(file)).map_err(|e| step_error(step, e))?,
            (None, None) => Vec::new(),
        };
        let method = Method::from_bytes(step.method.as_bytes()).map_err(|e| step_error(step, e))?;
        let request = Request::builder()
            .method(method)
            .uri(&path)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body))
            .map_err(|e| step_error(step, e))?;
        let response = app.clone().oneshot(request).await.map_err(|e| step_error(step, e))?;
        let status = response.status().as_u16();
        let bytes = axum::body::to_bytes(response.into_body(), usize::MAX)
            .await
            .map_err(|e| step_error(step, e))?;
        let mut value: Value = serde_json::from_slice(&bytes).map_err(|e| step_error(step, e))?;
        for (name, pointer) in &step.capture {
            let captured = value
                .pointer(pointer)
                .and_then(Value::as_str)
                .ok_or_else(|| step_error(step, format!("nothing to capture at {pointer}")))?;
            captures.insert(name.clone(), captured.to_string());
        }
        normalize(&mut value, captures);
        out.push(Exchange {
            status,
            response: value,
        });
    }
    Ok(out)
}

/// Differences between the recorded and replayed exchanges, one line per
/// mismatching step.
pub fn compare(script: &Script, replayed: &[Exchange]) -> Vec<String> {
    let mut problems = Vec::new();
    if script.steps.len() != replayed.len() {
        problems.push(format!("{} steps recorded, {} replayed", script.steps.len(), replayed.len()));
    }
    for (step, got) in script.steps.iter().zip(replayed) {
        if step.status != Some(got.status) {
            problems.push(format!("{}: status {:?} recorded, {} replayed", step.name, step.status, got.status));
        }
        if step.response.as_ref() != Some(&got.response) {
            problems.push(format!("{}: response body differs", step.name));
        }
    }
    problems
}

/// The script with the replayed responses recorded into it.
pub fn record(script: &Script, replayed: &[Exchange]) -> Script {
    let mut out = script.clone();
    for (step, got) in out.steps.iter_mut().zip(replayed) {
        step.status = Some(got.status);
        step.response = Some(got.response.clone());
    }
    out
}
