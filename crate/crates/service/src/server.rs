//! HTTP API over the assessment pipeline and the writing assistant.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use casa_core::assistance::{revise_with_llm, suggest};
use casa_core::pipeline::Casa;
use casa_core::{Argument, CasaError, PipelineConfig};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{Backends, ServiceConfig};
use crate::store::{RunRecord, RunStore};

/// Error body: `{"code": "...", "message": "..."}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn body(&self) -> Value {
        json!({"code": self.code, "message": self.message})
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

/// Stable machine-readable code for each error kind.
pub fn error_code(e: &CasaError) -> &'static str {
    match e {
        CasaError::EmptyInput => "empty_input",
        CasaError::InvalidInput(_) => "invalid_input",
        CasaError::SingleClaimArgument => "single_claim_argument",
        CasaError::UnhandledSyntax(_) => "unhandled_syntax",
        CasaError::UnparseableResponse(_) => "unparseable_response",
        CasaError::InsufficientContexts { .. } => "insufficient_contexts",
        CasaError::BackendUnavailable(_) => "backend_unavailable",
        CasaError::BackendRefused { .. } => "backend_refused",
        CasaError::LogprobsUnsupported => "logprobs_unsupported",
        CasaError::CacheCorrupt { .. } => "cache_corrupt",
        CasaError::EmptyObjection => "empty_objection",
        CasaError::SchemaError { .. } => "schema_error",
        CasaError::LengthMismatch(..) => "length_mismatch",
        CasaError::EmptyReference => "empty_reference",
        CasaError::UnknownMethod(_) => "unknown_method",
        CasaError::Io(_) => "io_error",
        CasaError::Json(_) => "json_error",
    }
}

impl From<CasaError> for ApiError {
    fn from(e: CasaError) -> Self {
        let status = if e.is_backend() {
            StatusCode::BAD_GATEWAY
        } else if matches!(e, CasaError::Io(_)) {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::UNPROCESSABLE_ENTITY
        };
        ApiError::new(status, error_code(&e), e.to_string())
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "run_store", e.to_string())
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub pipeline: PipelineConfig,
    pub backends: Backends,
    pub store: RunStore,
    pub timeout: Duration,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, Box<dyn std::error::Error>> {
        let pipeline = config.pipeline()?;
        let backends = config.backends()?;
        let store = RunStore::open(&config.runs_dir)?;
        let timeout = config.timeout();
        Ok(AppState { config, pipeline, backends, store, timeout })
    }

    fn casa(&self, overrides: Option<&Value>) -> Result<Casa, ApiError> {
        let config = match overrides {
            None | Some(Value::Null) => self.pipeline.clone(),
            Some(Value::Object(o)) => {
                let mut base = serde_json::to_value(&self.pipeline).expect("config serializes");
                for (k, v) in o {
                    base[k] = v.clone();
                }
                serde_json::from_value(base)
                    .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", e.to_string()))?
            }
            Some(_) => return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid_config", "config must be an object")),
        };
        Ok(Casa::new(config, self.backends.llm.clone(), self.backends.nli.clone())?)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/assess", post(assess))
        .route("/v1/objections", post(objections))
        .route("/v1/revise", post(revise))
        .route("/v1/runs", get(list_runs))
        .route("/v1/runs/{id}", get(get_run))
        .with_state(state)
}

pub async fn serve(config: ServiceConfig) -> Result<(), Box<dyn std::error::Error>> {
    let bind = config.bind.clone();
    let state = Arc::new(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(&bind).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn healthz() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Default, Deserialize)]
pub struct RunQuery {
    #[serde(default, rename = "async")]
    pub run_async: Option<String>,
}

impl RunQuery {
    fn is_async(&self) -> bool {
        matches!(self.run_async.as_deref(), Some("1" | "true" | "yes"))
    }
}

type Job = Box<dyn FnOnce() -> Result<Value, ApiError> + Send + 'static>;

async fn run_blocking(job: Job) -> Result<Value, ApiError> {
    tokio::task::spawn_blocking(job)
        .await
        .unwrap_or_else(|e| Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())))
}

/// Persists a pending run, executes `job` and records its outcome. In async
/// mode the response is `202 {"run_id", "status": "pending"}` and the caller
/// polls `/v1/runs/{id}`.
async fn execute(state: Arc<AppState>, kind: &str, request: Value, run_async: bool, job: Job) -> Response {
    let record = match state.store.create(kind, request) {
        Ok(r) => r,
        Err(e) => return ApiError::from(e).into_response(),
    };
    if run_async {
        let run_id = record.run_id.clone();
        let st = state.clone();
        tokio::spawn(async move {
            let out = run_blocking(job).await;
            let _ = finish(&st.store, record, out);
        });
        return (StatusCode::ACCEPTED, Json(json!({"run_id": run_id, "status": "pending"}))).into_response();
    }
    let out = match tokio::time::timeout(state.timeout, run_blocking(job)).await {
        Ok(out) => out,
        Err(_) => Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", format!("no result within {:?}", state.timeout))),
    };
    let run_id = record.run_id.clone();
    if let Err(e) = finish(&state.store, record, out.clone()) {
        return ApiError::from(e).into_response();
    }
    match out {
        Ok(mut body) => {
            if let Value::Object(o) = &mut body {
                o.insert("run_id".into(), Value::String(run_id));
            }
            Json(body).into_response()
        }
        Err(e) => e.into_response(),
    }
}

fn finish(store: &RunStore, record: RunRecord, out: Result<Value, ApiError>) -> std::io::Result<RunRecord> {
    store.finish(record, out.map_err(|e| e.body()))
}

fn argument(id: Option<String>, text: String) -> Result<Argument, ApiError> {
    Ok(Argument::new(id.unwrap_or_else(|| "request".into()), text)?)
}

#[derive(Debug, Deserialize)]
pub struct AssessRequest {
    pub text: String,
    #[serde(default)]
    pub id: Option<String>,
    /// Overrides for individual pipeline settings.
    #[serde(default)]
    pub config: Option<Value>,
    #[serde(default)]
    pub trace: bool,
}

async fn assess(State(state): State<Arc<AppState>>, Query(q): Query<RunQuery>, Json(raw): Json<Value>) -> Response {
    let req: AssessRequest = match serde_json::from_value(raw.clone()) {
        Ok(r) => r,
        Err(e) => return ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()).into_response(),
    };
    let casa = match state.casa(req.config.as_ref()) {
        Ok(c) => c,
        Err(e) => return e.into_response(),
    };
    let job: Job = Box::new(move || {
        let argument = argument(req.id, req.text)?;
        let assessment = casa.assess(&argument)?;
        let mut body = serde_json::to_value(&assessment.verdict).expect("verdict serializes");
        if req.trace {
            body["trace"] = serde_json::to_value(&assessment.trace).expect("trace serializes");
        }
        Ok(body)
    });
    execute(state, "assess", raw, q.is_async(), job).await
}

#[derive(Debug, Deserialize)]
pub struct ObjectionsRequest {
    pub text: String,
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: Option<Value>,
}

async fn objections(State(state): State<Arc<AppState>>, Query(q): Query<RunQuery>, Json(raw): Json<Value>) -> Response {
    let req: ObjectionsRequest = match serde_json::from_value(raw.clone()) {
        Ok(r) => r,
        Err(e) => return ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()).into_response(),
    };
    let casa = match state.casa(req.config.as_ref()) {
        Ok(c) => c,
        Err(e) => return e.into_response(),
    };
    let seed = req.seed.unwrap_or(state.pipeline.seed);
    let job: Job = Box::new(move || {
        let argument = argument(req.id, req.text)?;
        let s = suggest(&casa, &argument, seed)?;
        Ok(json!({"verdict": s.assessment.verdict, "suggestions": s.suggestions}))
    });
    execute(state, "objections", raw, q.is_async(), job).await
}

#[derive(Debug, Deserialize)]
pub struct ReviseRequest {
    pub text: String,
    pub objection: String,
}

async fn revise(State(state): State<Arc<AppState>>, Query(q): Query<RunQuery>, Json(raw): Json<Value>) -> Response {
    let req: ReviseRequest = match serde_json::from_value(raw.clone()) {
        Ok(r) => r,
        Err(e) => return ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()).into_response(),
    };
    let llm = state.backends.llm.clone();
    let job: Job = Box::new(move || Ok(json!({"revised": revise_with_llm(&req.text, &req.objection, &llm)?})));
    execute(state, "revise", raw, q.is_async(), job).await
}

async fn list_runs(State(state): State<Arc<AppState>>) -> Response {
    match state.store.list() {
        Ok(runs) => Json(json!({"runs": runs})).into_response(),
        Err(e) => ApiError::from(e).into_response(),
    }
}

async fn get_run(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.store.get(&id) {
        Ok(Some(r)) => Json(r).into_response(),
        Ok(None) => ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no run {id:?}")).into_response(),
        Err(e) => ApiError::from(e).into_response(),
    }
}
