//! Tutor service: a REST API over fragments, catalogs, rule packs, planning
//! and learner sessions, persisted in a file-backed document store.
//!
//! All request and response bodies are JSON. Sessions run under per-session
//! mutual exclusion; a submission that arrives while another one for the same
//! session is in flight is refused with `409 CONCURRENT_SUBMISSION`.

pub mod api;
pub mod config;
pub mod error;
pub mod replay;
pub mod store;

use std::sync::Arc;

pub use api::{canonical, router, AppState, SessionDocument, SharedState};
pub use config::ServiceConfig;
pub use error::{ApiError, ERROR_CODES};
pub use store::{Collection, DocumentStore, StoreError, StoredDocument, WriteHook, WriteStage};

/// Opens the store named by `config` and builds the router.
pub fn app(config: ServiceConfig) -> Result<axum::Router, StoreError> {
    let store = DocumentStore::open(&config.data_dir)?;
    Ok(router(Arc::new(AppState::new(store, config))))
}

/// Serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let listen = config.listen.clone();
    let app = app(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    tracing::info!(address = %listener.local_addr()?, "tutor service listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
