//! HTTP routes and handlers.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use dashmap::DashMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tutorgraph_core::engine::{
    negotiate, Engine, EngineConfig, NextAssignment, RenderedActivity, Session, SessionMeta,
    SessionStatus, Submission, ValidationOutcome,
};
use tutorgraph_core::fragment::{
    default_context_vars, load_fragment, serialize_fragment, validate_fragment, AbstractConstraints,
    ConceptId, LearningFragment, Modality,
};
use tutorgraph_core::gamification::{AwardRecord, GamificationRulePack, GamificationState, Rule};
use tutorgraph_core::planner::{
    attach_gamification, plan_goal, refine, CatalogEntry, FragmentCatalog,
};

use crate::config::ServiceConfig;
use crate::error::ApiError;
use crate::store::{Collection, DocumentStore, StoreError};

/// Two-space indented JSON with a trailing newline, the format of every
/// stored document and response body.
pub fn canonical<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("response types always serialize");
    bytes.push(b'\n');
    bytes
}

fn json(status: StatusCode, value: &impl Serialize) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], canonical(value)).into_response()
}

fn raw(body: Vec<u8>) -> Response {
    (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => ApiError::new("SCHEMA_VIOLATION", e.to_string()),
            _ => ApiError::new("MALFORMED_DOCUMENT", e.to_string())
                .with("line", e.line())
                .with("column", e.column()),
        }
    })
}

/// Parses a document that the service itself wrote.
fn parse_stored<T: DeserializeOwned>(collection: Collection, id: &str, body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::internal(format!("stored {collection}/{id} is unreadable: {e}")))
}

fn stored_fragment(id: &str, body: &[u8]) -> Result<LearningFragment, ApiError> {
    load_fragment(body).map_err(|e| ApiError::internal(format!("stored fragment {id} is unreadable: {e}")))
}

#[derive(Debug, Deserialize)]
pub struct VersionQuery {
    pub version: Option<u32>,
}

type VersionParam = Result<Query<VersionQuery>, QueryRejection>;

fn version(q: VersionParam) -> Result<Option<u32>, ApiError> {
    q.map(|Query(q)| q.version)
        .map_err(|e| ApiError::new("INVALID_QUERY", e.body_text()))
}

/// A session with its engine. The engine is immutable; the session is
/// mutated only under its lock.
pub struct LiveSession {
    engine: Engine,
    rulepacks: Vec<String>,
    session: Mutex<Session>,
}

/// Everything needed to resume a session after a restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionDocument {
    pub session: Session,
    /// The refined fragment the session runs.
    pub fragment: LearningFragment,
    pub rulepacks: Vec<String>,
    pub rules: Vec<Rule>,
    pub engine: EngineConfig,
}

pub struct AppState {
    pub store: DocumentStore,
    pub config: ServiceConfig,
    live: DashMap<String, Arc<LiveSession>>,
}

impl AppState {
    pub fn new(store: DocumentStore, config: ServiceConfig) -> Self {
        AppState {
            store,
            config,
            live: DashMap::new(),
        }
    }

    fn live_session(&self, id: &str) -> Result<Arc<LiveSession>, ApiError> {
        if let Some(live) = self.live.get(id) {
            return Ok(live.clone());
        }
        let stored = self.store.fetch(Collection::Sessions, id, None)?;
        let doc: SessionDocument = parse_stored(Collection::Sessions, id, &stored.body)?;
        let engine = Engine::new(doc.fragment, doc.rules, doc.engine)?;
        let live = Arc::new(LiveSession {
            engine,
            rulepacks: doc.rulepacks,
            session: Mutex::new(doc.session),
        });
        Ok(self.live.entry(id.to_string()).or_insert(live).clone())
    }

    fn persist_session(&self, engine: &Engine, rulepacks: &[String], session: &Session) -> Result<(), ApiError> {
        let doc = SessionDocument {
            session: session.clone(),
            fragment: engine.fragment().clone(),
            rulepacks: rulepacks.to_vec(),
            rules: engine.rules().to_vec(),
            engine: engine.config().clone(),
        };
        self.store.replace(Collection::Sessions, &session.id, &canonical(&doc))?;
        Ok(())
    }

    /// Catalog derived from the latest version of every stored fragment that
    /// teaches something, except `exclude`. A fragment being refined is never
    /// a candidate for its own abstract nodes.
    fn default_catalog(&self, exclude: Option<&str>) -> Result<FragmentCatalog, ApiError> {
        let mut fragments = Vec::new();
        for doc in self.store.latest_all(Collection::Fragments)? {
            fragments.push(stored_fragment(&doc.id, &doc.body)?);
        }
        let mut catalog = FragmentCatalog::from_fragments(&fragments);
        catalog
            .fragments
            .retain(|e| !e.provides.is_empty() && Some(e.fragment_id.as_str()) != exclude);
        Ok(catalog)
    }

    fn catalog(
        &self,
        id: Option<&str>,
        version: Option<u32>,
        exclude: Option<&str>,
    ) -> Result<FragmentCatalog, ApiError> {
        match id {
            Some(id) => {
                let stored = self.store.fetch(Collection::Catalogs, id, version)?;
                let doc: CatalogDocument = parse_stored(Collection::Catalogs, id, &stored.body)?;
                Ok(FragmentCatalog {
                    fragments: doc.fragments,
                })
            }
            None => self.default_catalog(exclude),
        }
    }

    fn library(&self) -> Result<BTreeMap<(String, u32), LearningFragment>, ApiError> {
        let mut library = BTreeMap::new();
        for (id, versions) in self.store.list(Collection::Fragments)? {
            for v in versions {
                let doc = self.store.fetch(Collection::Fragments, &id, Some(v))?;
                library.insert((id.clone(), v), stored_fragment(&id, &doc.body)?);
            }
        }
        Ok(library)
    }
}

pub type SharedState = Arc<AppState>;

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/fragments", post(create_fragment).get(list_fragments))
        .route("/fragments/{id}", get(get_fragment))
        .route("/fragments/{id}/validate", post(validate))
        .route("/fragments/{id}/negotiate", post(negotiate_caps))
        .route("/catalogs", post(create_catalog).get(list_catalogs))
        .route("/catalogs/{id}", get(get_catalog))
        .route("/plan", post(plan))
        .route("/rulepacks", post(create_rulepack).get(list_rulepacks))
        .route("/rulepacks/{id}", get(get_rulepack))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/current", get(current))
        .route("/sessions/{id}/submissions", post(submit))
        .fallback(|| async { ApiError::new("NOT_FOUND", "no such route") })
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

async fn authorize(State(state): State<SharedState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.config.api_token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new("UNAUTHORIZED", "missing or invalid bearer token").into_response();
        }
    }
    next.run(req).await
}

#[derive(Debug, Serialize)]
struct Published<'a> {
    id: &'a str,
    version: u32,
}

#[derive(Debug, Serialize)]
struct Listing {
    id: String,
    versions: Vec<u32>,
    latest: u32,
}

fn listing(store: &DocumentStore, collection: Collection) -> Result<Response, ApiError> {
    let items: Vec<Listing> = store
        .list(collection)?
        .into_iter()
        .map(|(id, versions)| Listing {
            latest: *versions.last().expect("listed documents have a version"),
            id,
            versions,
        })
        .collect();
    Ok(json(StatusCode::OK, &items))
}

async fn create_fragment(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let fragment = load_fragment(&body)?;
    let report = validate_fragment(&fragment, &default_context_vars());
    if !report.is_publishable() {
        return Err(ApiError::new(
            "INVALID_FRAGMENT",
            format!("fragment has {} validation error(s)", report.errors.len()),
        )
        .with("report", &report));
    }
    state.store.publish(
        Collection::Fragments,
        &fragment.id,
        fragment.version,
        &serialize_fragment(&fragment),
    )?;
    Ok(json(
        StatusCode::CREATED,
        &Published {
            id: &fragment.id,
            version: fragment.version,
        },
    ))
}

async fn list_fragments(State(state): State<SharedState>) -> Result<Response, ApiError> {
    listing(&state.store, Collection::Fragments)
}

async fn get_fragment(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    q: VersionParam,
) -> Result<Response, ApiError> {
    Ok(raw(state.store.fetch(Collection::Fragments, &id, version(q)?)?.body))
}

/// Validates the posted draft, or the stored fragment when the body is empty.
async fn validate(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    q: VersionParam,
    body: Bytes,
) -> Result<Response, ApiError> {
    let fragment = if body.iter().all(u8::is_ascii_whitespace) {
        let doc = state.store.fetch(Collection::Fragments, &id, version(q)?)?;
        stored_fragment(&id, &doc.body)?
    } else {
        load_fragment(&body)?
    };
    if fragment.id != id {
        return Err(ApiError::new(
            "ID_MISMATCH",
            format!("body describes `{}` but the path names `{id}`", fragment.id),
        ));
    }
    Ok(json(StatusCode::OK, &validate_fragment(&fragment, &default_context_vars())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NegotiateRequest {
    capabilities: BTreeSet<Modality>,
    #[serde(default)]
    version: Option<u32>,
}

async fn negotiate_caps(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: NegotiateRequest = parse(&body)?;
    let doc = state.store.fetch(Collection::Fragments, &id, req.version)?;
    let fragment = stored_fragment(&id, &doc.body)?;
    Ok(json(StatusCode::OK, &negotiate(&req.capabilities, &fragment)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDocument {
    pub id: String,
    #[serde(default = "first_version")]
    pub version: u32,
    pub fragments: Vec<CatalogEntry>,
}

fn first_version() -> u32 {
    1
}

async fn create_catalog(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let doc: CatalogDocument = parse(&body)?;
    FragmentCatalog {
        fragments: doc.fragments.clone(),
    }
    .validate()?;
    state
        .store
        .publish(Collection::Catalogs, &doc.id, doc.version, &canonical(&doc))?;
    Ok(json(
        StatusCode::CREATED,
        &Published {
            id: &doc.id,
            version: doc.version,
        },
    ))
}

async fn list_catalogs(State(state): State<SharedState>) -> Result<Response, ApiError> {
    listing(&state.store, Collection::Catalogs)
}

async fn get_catalog(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    q: VersionParam,
) -> Result<Response, ApiError> {
    Ok(raw(state.store.fetch(Collection::Catalogs, &id, version(q)?)?.body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanRequest {
    goal: BTreeSet<ConceptId>,
    #[serde(default)]
    known: BTreeSet<ConceptId>,
    #[serde(default)]
    constraints: AbstractConstraints,
    #[serde(default)]
    capabilities: Option<BTreeSet<Modality>>,
    #[serde(default)]
    catalog_id: Option<String>,
    #[serde(default)]
    catalog_version: Option<u32>,
}

async fn plan(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: PlanRequest = parse(&body)?;
    let catalog = state.catalog(req.catalog_id.as_deref(), req.catalog_version, None)?;
    let plan = plan_goal(
        &req.goal,
        &req.known,
        &catalog,
        &req.constraints,
        req.capabilities.as_ref(),
        &state.config.limits,
    )?;
    Ok(json(StatusCode::OK, &plan))
}

/// Rule packs carry no version of their own and are stored as version 1.
async fn create_rulepack(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let pack: GamificationRulePack = parse(&body)?;
    pack.validate()?;
    state
        .store
        .publish(Collection::Rulepacks, &pack.id, 1, &canonical(&pack))?;
    Ok(json(StatusCode::CREATED, &Published { id: &pack.id, version: 1 }))
}

async fn list_rulepacks(State(state): State<SharedState>) -> Result<Response, ApiError> {
    listing(&state.store, Collection::Rulepacks)
}

async fn get_rulepack(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(raw(state.store.fetch(Collection::Rulepacks, &id, None)?.body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    fragment_id: String,
    #[serde(default)]
    version: Option<u32>,
    learner_id: String,
    capabilities: BTreeSet<Modality>,
    /// Catalog for refinement; defaults to one derived from stored fragments.
    #[serde(default)]
    catalog_id: Option<String>,
    /// Candidate rule packs; defaults to every stored pack.
    #[serde(default)]
    rulepacks: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
struct SessionCreated<'a> {
    session: &'a Session,
    current: RenderedActivity,
    rulepacks: Vec<String>,
    warnings: Vec<String>,
}

async fn create_session(State(state): State<SharedState>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse(&body)?;
    let doc = state
        .store
        .fetch(Collection::Fragments, &req.fragment_id, req.version)?;
    let mut fragment = stored_fragment(&doc.id, &doc.body)?;
    if fragment.abstract_nodes().next().is_some() {
        let catalog = state.catalog(req.catalog_id.as_deref(), None, Some(&fragment.id))?;
        fragment = refine(
            &fragment,
            &catalog,
            &state.library()?,
            Some(&req.capabilities),
            &state.config.limits,
        )?;
    }

    let packs: Vec<GamificationRulePack> = match &req.rulepacks {
        Some(ids) => ids
            .iter()
            .map(|id| state.store.fetch(Collection::Rulepacks, id, None))
            .collect::<Result<Vec<_>, StoreError>>()?,
        None => state.store.latest_all(Collection::Rulepacks)?,
    }
    .iter()
    .map(|d| parse_stored(Collection::Rulepacks, &d.id, &d.body))
    .collect::<Result<_, _>>()?;
    let attached = attach_gamification(&fragment, &packs);

    let engine = Engine::new(fragment, attached.rules, state.config.engine_config())?;
    let meta = SessionMeta {
        id: ulid::Ulid::new().to_string(),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let session = engine.start_session(&req.learner_id, &req.capabilities, meta)?;
    let current = engine.current_activity(&session)?;
    state.persist_session(&engine, &attached.packs, &session)?;
    let body = json(
        StatusCode::CREATED,
        &SessionCreated {
            session: &session,
            current,
            rulepacks: attached.packs.clone(),
            warnings: attached.warnings,
        },
    );
    state.live.insert(
        session.id.clone(),
        Arc::new(LiveSession {
            engine,
            rulepacks: attached.packs,
            session: Mutex::new(session),
        }),
    );
    Ok(body)
}

async fn get_session(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let live = state.live_session(&id)?;
    let session = live.session.lock().await;
    Ok(json(StatusCode::OK, &*session))
}

async fn current(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let live = state.live_session(&id)?;
    let session = live.session.lock().await;
    Ok(json(StatusCode::OK, &live.engine.current_activity(&session)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitRequest {
    submission: Submission,
}

#[derive(Debug, Serialize)]
struct SubmitResponse {
    outcome: ValidationOutcome,
    next: NextAssignment,
    awards: Vec<AwardRecord>,
    gamification: GamificationState,
    status: SessionStatus,
    steps: u32,
    /// The activity to show next, while the session is active.
    #[serde(skip_serializing_if = "Option::is_none")]
    current: Option<RenderedActivity>,
}

async fn submit(
    State(state): State<SharedState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: SubmitRequest = parse(&body)?;
    let live = state.live_session(&id)?;
    let Ok(mut guard) = live.session.try_lock() else {
        return Err(ApiError::new(
            "CONCURRENT_SUBMISSION",
            "another submission for this session is in progress",
        )
        .with("session", &id));
    };
    let delay = state.config.transition_delay();
    if !delay.is_zero() {
        tokio::time::sleep(delay).await;
    }
    // Work on a copy so a failed write leaves the live session untouched.
    let mut next = guard.clone();
    let result = live.engine.submit(&mut next, req.submission)?;
    state.persist_session(&live.engine, &live.rulepacks, &next)?;
    *guard = next;
    let current = match guard.status {
        SessionStatus::Active => Some(live.engine.current_activity(&guard)?),
        _ => None,
    };
    Ok(json(
        StatusCode::OK,
        &SubmitResponse {
            outcome: result.outcome,
            next: result.next,
            awards: result.awards,
            gamification: guard.gamification.clone(),
            status: guard.status,
            steps: guard.steps,
            current,
        },
    ))
}
