#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use serde_json::Value;
use tempfile::TempDir;
use tower::ServiceExt;
use tutorgraph_service::{router, AppState, DocumentStore, ServiceConfig};

pub struct Harness {
    pub dir: TempDir,
    pub config: ServiceConfig,
    pub app: Router,
}

impl Harness {
    pub fn new() -> Self {
        Harness::with(|_| {})
    }

    pub fn with(tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServiceConfig {
            data_dir: dir.path().to_path_buf(),
            ..ServiceConfig::default()
        };
        tweak(&mut config);
        let app = build(&config);
        Harness { dir, config, app }
    }

    /// A fresh app over the same data directory, as after a restart.
    pub fn restart(&mut self) {
        self.app = build(&self.config);
    }

    pub async fn call(&self, method: &str, path: &str, body: Option<&[u8]>) -> (StatusCode, Vec<u8>) {
        send(self.app.clone(), method, path, body, None).await
    }

    pub async fn json(&self, method: &str, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let bytes = body.map(|b| serde_json::to_vec(&b).unwrap());
        let (status, out) = self.call(method, path, bytes.as_deref()).await;
        let value = if out.is_empty() { Value::Null } else { serde_json::from_slice(&out).unwrap() };
        (status, value)
    }
}

fn build(config: &ServiceConfig) -> Router {
    let store = DocumentStore::open(&config.data_dir).unwrap();
    router(Arc::new(AppState::new(store, config.clone())))
}

pub async fn send(
    app: Router,
    method: &str,
    path: &str,
    body: Option<&[u8]>,
    token: Option<&str>,
) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder()
        .method(Method::from_bytes(method.as_bytes()).unwrap())
        .uri(path)
        .header(header::CONTENT_TYPE, "application/json");
    if let Some(token) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {token}"));
    }
    let req = req.body(Body::from(body.map(<[u8]>::to_vec).unwrap_or_default())).unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = axum::body::to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, bytes)
}

pub fn code(body: &Value) -> &str {
    body["code"].as_str().unwrap_or("<none>")
}
