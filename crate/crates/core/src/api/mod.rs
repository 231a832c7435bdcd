//! HTTP service: the JSON contract the classroom web client consumes.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | GET | `/healthz` | | 200 name, version, provider |
//! | POST | `/projects` | `{title?, logline_draft}` | 201 project |
//! | GET | `/projects` | | 200 summaries |
//! | GET | `/projects/{id}` | | 200 project |
//! | GET | `/projects/{id}/history?stage=` | | 200 revision entries |
//! | GET, POST | `/projects/{id}/stages/{stage}/tutor` | `{message, seed?}` | 200 `{reply, session}` |
//! | POST | `/projects/{id}/stages/{stage}/generate` | `{seed?, count_hint?, style_notes?, expected_revision?}` | 200 `{project, attempts, raw_text}` or 202 job |
//! | POST | `/projects/{id}/stages/{stage}/confirm` | `{expected_revision?, elements?}` | 200 project |
//! | POST | `/projects/{id}/stages/{stage}/cascade` | as generate | 200 project or 202 job |
//! | PATCH | `/projects/{id}/elements/{element_id}` | field patch, `If-Match-Revision` required | 200 project |
//! | GET | `/projects/{id}/staleness` | | 200 per-stage freshness |
//! | GET | `/projects/{id}/validation` | | 200 violations |
//! | GET | `/projects/{id}/diff/{stage}` | | 200 diff report |
//! | GET | `/projects/{id}/export?format=json\|screenplay` | | 200 document |
//! | POST | `/analytics/sus` | `{responses}`, `{csv}` or `{adjusted_item_means}` | 200 report |
//! | POST | `/analytics/compare` | `{original, revised}` | 200 diff report |
//! | GET | `/jobs/{id}` | | 200 `{status, result?, error?}` |
//!
//! Errors are `{http_status, code, message, details}`:
//!
//! | code | status |
//! |---|---|
//! | `VALIDATION` | 422 |
//! | `STAGE_ORDER` | 409 |
//! | `CONFLICT` | 409 |
//! | `NOT_FOUND` | 404 |
//! | `INVALID_REQUEST` | 400 |
//! | `REVISION_REQUIRED` | 428 |
//! | `PROVIDER_TIMEOUT` | 504 |
//! | `PROVIDER_AUTH` | 502 |
//! | `PROVIDER_RATE_LIMIT` | 429 |
//! | `PROVIDER_TRANSPORT` | 502 |
//! | `SCHEMA` | 502 |
//! | `STORAGE` | 500 |
//! | `INTERNAL` | 500 |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::agents::{GenerateOptions, TutorSession};
use crate::analytics::{self, SusResponse};
use crate::error::Error;
use crate::model::{screenplay, validate_project, ElementId, ProjectId, ScriptProject, Stage, StageContent};
use crate::pipeline::{staleness, Engine};
use crate::store::Store;

pub const REVISION_HEADER: &str = "if-match-revision";
pub const DEFAULT_JOB_THRESHOLD: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            http_status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: Value::Null,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }
}

/// HTTP status for each engine error code.
pub fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::StageOrder { .. } | Error::Conflict { .. } => StatusCode::CONFLICT,
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        Error::Provider(p) => match p {
            crate::agents::ProviderError::Timeout(_) => StatusCode::GATEWAY_TIMEOUT,
            crate::agents::ProviderError::RateLimit(_) => StatusCode::TOO_MANY_REQUESTS,
            crate::agents::ProviderError::Auth(_) | crate::agents::ProviderError::Transport(_) => {
                StatusCode::BAD_GATEWAY
            }
        },
        Error::Schema(_) => StatusCode::BAD_GATEWAY,
        Error::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(error: Error) -> Self {
        let details = match &error {
            Error::Validation(report) => json!({ "violations": report.violations }),
            Error::StageOrder { stage, missing } => json!({ "stage": stage, "missing": missing }),
            Error::Conflict { expected, actual } => json!({ "expected": expected, "actual": actual }),
            Error::Schema(e) => json!({
                "code": e.code,
                "attempts": e.attempts,
                "raw_text": e.raw_text,
                "diagnostics": e.diagnostics,
            }),
            _ => Value::Null,
        };
        ApiError {
            http_status: status_for(&error).as_u16(),
            code: error.code().to_string(),
            message: error.to_string(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
enum Job {
    Pending,
    Done { result: Value },
    Failed { error: ApiError },
}

/// Shared service state.
pub struct AppState {
    engine: Arc<Engine>,
    store: Arc<Store>,
    job_threshold: Duration,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    sessions: Mutex<HashMap<(String, Stage), TutorSession>>,
    jobs: Mutex<HashMap<String, Job>>,
}

impl AppState {
    pub fn new(engine: Engine, store: Store) -> Arc<Self> {
        Self::with_job_threshold(engine, store, DEFAULT_JOB_THRESHOLD)
    }

    /// `threshold` is how long a generation may run before the request is
    /// answered with 202 and a poll URL.
    pub fn with_job_threshold(engine: Engine, store: Store, threshold: Duration) -> Arc<Self> {
        Arc::new(AppState {
            engine: Arc::new(engine),
            store: Arc::new(store),
            job_threshold: threshold,
            locks: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn project_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/history", get(history))
        .route("/projects/{id}/stages/{stage}/tutor", post(tutor).get(tutor_session))
        .route("/projects/{id}/stages/{stage}/generate", post(generate))
        .route("/projects/{id}/stages/{stage}/confirm", post(confirm))
        .route("/projects/{id}/stages/{stage}/cascade", post(cascade))
        .route("/projects/{id}/elements/{element_id}", patch(edit_element))
        .route("/projects/{id}/staleness", get(get_staleness))
        .route("/projects/{id}/validation", get(get_validation))
        .route("/projects/{id}/diff/{stage}", get(diff))
        .route("/projects/{id}/export", get(export))
        .route("/analytics/sus", post(sus))
        .route("/analytics/compare", post(compare))
        .route("/jobs/{id}", get(job))
        .layer(middleware::from_fn(log_requests))
        .with_state(state)
}

async fn log_requests(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let started = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "request"
    );
    response
}

/// Bind and serve until ctrl-c.
pub async fn serve(bind: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, provider = state.engine.provider().name(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    let text = if body.iter().all(u8::is_ascii_whitespace) {
        &b"{}"[..]
    } else {
        &body[..]
    };
    serde_json::from_slice(text).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

fn parse_stage(s: &str) -> ApiResult<Stage> {
    Stage::from_str(s).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn header_revision(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    headers
        .get(REVISION_HEADER)
        .map(|v| {
            v.to_str()
                .ok()
                .and_then(|s| s.trim().trim_matches('"').parse::<u64>().ok())
                .ok_or_else(|| ApiError::bad_request("If-Match-Revision must be an integer"))
        })
        .transpose()
}

fn expected_revision(headers: &HeaderMap, body: Option<u64>) -> ApiResult<Option<u64>> {
    match (header_revision(headers)?, body) {
        (Some(h), Some(b)) if h != b => Err(ApiError::bad_request(
            "If-Match-Revision header and expected_revision disagree",
        )),
        (h, b) => Ok(h.or(b)),
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn project_json(project: &ScriptProject) -> Value {
    serde_json::to_value(project).expect("projects serialize")
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "name": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "provider": state.engine.provider().name(),
    }))
}

#[derive(Deserialize)]
struct CreateBody {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    logline_draft: String,
}

async fn create_project(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let body: CreateBody = parse_body(&body)?;
    let project = ScriptProject::new(
        ProjectId::random(),
        body.title.unwrap_or_else(|| "Untitled".into()),
        body.logline_draft,
    );
    let st = state.clone();
    let saved = project.clone();
    blocking(move || st.store.save(&saved).map_err(ApiError::from)).await?;
    Ok((StatusCode::CREATED, Json(project_json(&project))).into_response())
}

async fn list_projects(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let st = state.clone();
    let list = blocking(move || st.store.list().map_err(ApiError::from)).await?;
    Ok(Json(json!({ "projects": list })))
}

async fn load(state: &Arc<AppState>, id: &str) -> ApiResult<ScriptProject> {
    let st = state.clone();
    let id = ProjectId(id.to_string());
    blocking(move || st.store.load(&id).map_err(ApiError::from)).await
}

async fn get_project(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(project_json(&load(&state, &id).await?)))
}

#[derive(Deserialize)]
struct HistoryQuery {
    stage: Option<String>,
}

async fn history(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<HistoryQuery>,
) -> ApiResult<Json<Value>> {
    let stage = q.stage.as_deref().map(parse_stage).transpose()?;
    let st = state.clone();
    let entries = blocking(move || {
        st.store
            .history(&ProjectId(id), stage)
            .map_err(ApiError::from)
    })
    .await?;
    Ok(Json(json!({ "entries": entries })))
}

#[derive(Deserialize)]
struct TutorBody {
    message: String,
    #[serde(default)]
    seed: u64,
}

async fn tutor(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let stage = parse_stage(&stage)?;
    let body: TutorBody = parse_body(&body)?;
    let lock = state.project_lock(&id);
    let _guard = lock.lock().await;
    let project = load(&state, &id).await?;
    let key = (id.clone(), stage);
    let session = state
        .sessions
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&key)
        .cloned()
        .unwrap_or_else(|| TutorSession::new(project.id.clone(), stage));
    let st = state.clone();
    let (reply, session) = blocking(move || {
        st.engine
            .tutor_reply(&session, &body.message, &project, body.seed)
            .map_err(ApiError::from)
    })
    .await?;
    state
        .sessions
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key, session.clone());
    Ok(Json(json!({ "reply": reply, "session": session })))
}

async fn tutor_session(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let stage = parse_stage(&stage)?;
    let project = load(&state, &id).await?;
    let session = state
        .sessions
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&(id, stage))
        .cloned()
        .unwrap_or_else(|| TutorSession::new(project.id, stage));
    Ok(Json(json!({ "session": session })))
}

#[derive(Deserialize, Default)]
struct GenerateBody {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    count_hint: Option<u32>,
    #[serde(default)]
    style_notes: Option<String>,
    #[serde(default)]
    expected_revision: Option<u64>,
}

impl GenerateBody {
    fn options(&self) -> GenerateOptions {
        GenerateOptions {
            seed: self.seed,
            count_hint: self.count_hint,
            style_notes: self.style_notes.clone(),
        }
    }
}

/// Run a mutating job under the project lock. If it takes longer than the
/// job threshold the caller gets 202 and a poll URL instead of the result.
async fn run_job<F>(state: Arc<AppState>, id: String, work: F) -> ApiResult<Response>
where
    F: FnOnce(&AppState) -> ApiResult<Value> + Send + 'static,
{
    let job_id = uuid::Uuid::new_v4().simple().to_string();
    state
        .jobs
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(job_id.clone(), Job::Pending);
    let (tx, rx) = tokio::sync::oneshot::channel();
    let lock = state.project_lock(&id);
    let st = state.clone();
    let jid = job_id.clone();
    tokio::spawn(async move {
        let _guard = lock.lock_owned().await;
        let inner = st.clone();
        let result = blocking(move || work(&inner)).await;
        let job = match &result {
            Ok(v) => Job::Done { result: v.clone() },
            Err(e) => Job::Failed { error: e.clone() },
        };
        st.jobs.lock().unwrap_or_else(|e| e.into_inner()).insert(jid, job);
        let _ = tx.send(result);
    });
    match tokio::time::timeout(state.job_threshold, rx).await {
        Ok(Ok(result)) => {
            state.jobs.lock().unwrap_or_else(|e| e.into_inner()).remove(&job_id);
            result.map(|v| Json(v).into_response())
        }
        Ok(Err(_)) => Err(ApiError::internal("job ended without a result")),
        Err(_) => Ok((
            StatusCode::ACCEPTED,
            [(header::LOCATION, format!("/jobs/{job_id}"))],
            Json(json!({ "status": "pending", "job_id": job_id, "poll_url": format!("/jobs/{job_id}") })),
        )
            .into_response()),
    }
}

fn load_checked(state: &AppState, id: &str, expected: Option<u64>) -> ApiResult<ScriptProject> {
    let project = state.store.load(&ProjectId(id.to_string()))?;
    if let Some(expected) = expected {
        crate::pipeline::check_revision(&project, expected)?;
    }
    Ok(project)
}

async fn generate(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let stage = parse_stage(&stage)?;
    let body: GenerateBody = parse_body(&body)?;
    let expected = expected_revision(&headers, body.expected_revision)?;
    let pid = id.clone();
    run_job(state, id, move |st| {
        let project = load_checked(st, &pid, expected)?;
        let generated = st.engine.generate_stage(&project, stage, &body.options())?;
        st.store.save(&generated.project)?;
        Ok(json!({
            "project": project_json(&generated.project),
            "attempts": generated.outcome.attempts,
            "raw_text": generated.outcome.raw_text,
        }))
    })
    .await
}

async fn cascade(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    let stage = parse_stage(&stage)?;
    let body: GenerateBody = parse_body(&body)?;
    let expected = expected_revision(&headers, body.expected_revision)?;
    let pid = id.clone();
    run_job(state, id, move |st| {
        let project = load_checked(st, &pid, expected)?;
        match st.engine.regenerate_cascade(&project, stage, &body.options()) {
            Ok(done) => {
                st.store.save(&done)?;
                Ok(json!({ "project": project_json(&done) }))
            }
            Err(failure) => {
                // completed stages are kept
                if failure.project.revision != project.revision {
                    st.store.save(&failure.project)?;
                }
                let mut err = ApiError::from(failure.error);
                err.details = json!({
                    "cause": err.details,
                    "revision": failure.project.revision,
                });
                Err(err)
            }
        }
    })
    .await
}

#[derive(Deserialize, Default)]
struct ConfirmBody {
    #[serde(default)]
    expected_revision: Option<u64>,
    /// Replacement content: an element array, or a string for the logline.
    #[serde(default)]
    elements: Option<Value>,
    /// Logline text; shorthand for `elements` on the logline stage.
    #[serde(default)]
    text: Option<String>,
}

async fn confirm(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let stage = parse_stage(&stage)?;
    let body: ConfirmBody = parse_body(&body)?;
    let expected = expected_revision(&headers, body.expected_revision)?;
    let elements = match (body.elements, body.text) {
        (Some(_), Some(_)) => return Err(ApiError::bad_request("give either elements or text")),
        (Some(e), None) => Some(e),
        (None, Some(t)) => Some(Value::String(t)),
        (None, None) => None,
    };
    let payload = elements
        .map(|elements| {
            serde_json::from_value::<StageContent>(json!({ "stage": stage, "elements": elements }))
                .map_err(|e| ApiError::bad_request(format!("elements do not fit {stage}: {e}")))
        })
        .transpose()?;
    let lock = state.project_lock(&id);
    let _guard = lock.lock().await;
    let st = state.clone();
    let project = blocking(move || {
        let project = load_checked(&st, &id, expected)?;
        let next = st.engine.confirm_stage(&project, stage, payload)?;
        st.store.save(&next)?;
        Ok(next)
    })
    .await?;
    Ok(Json(project_json(&project)))
}

async fn edit_element(
    State(state): State<Arc<AppState>>,
    Path((id, element_id)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let expected = header_revision(&headers)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "REVISION_REQUIRED",
            "PATCH requires an If-Match-Revision header",
        )
    })?;
    let patch: Map<String, Value> = parse_body(&body)?;
    let lock = state.project_lock(&id);
    let _guard = lock.lock().await;
    let st = state.clone();
    let project = blocking(move || {
        let project = st.store.load(&ProjectId(id))?;
        let next = st
            .engine
            .edit_element(&project, &ElementId::from(element_id.as_str()), &patch, expected)?;
        st.store.save(&next)?;
        Ok(next)
    })
    .await?;
    Ok(Json(project_json(&project)))
}

async fn get_staleness(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let project = load(&state, &id).await?;
    Ok(Json(json!({ "revision": project.revision, "stages": staleness(&project).stages })))
}

async fn get_validation(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let project = load(&state, &id).await?;
    Ok(Json(json!({ "violations": validate_project(&project).violations })))
}

async fn diff(
    State(state): State<Arc<AppState>>,
    Path((id, stage)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    let stage = parse_stage(&stage)?;
    let project = load(&state, &id).await?;
    let (original, current) = analytics::stage_diff_texts(&project, stage)?;
    let report = analytics::compare(&original, &current);
    let mut body = serde_json::to_value(&report).expect("reports serialize");
    body["stage"] = json!(stage);
    body["original_text"] = json!(original);
    body["current_text"] = json!(current);
    Ok(Json(body))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Response> {
    let project = load(&state, &id).await?;
    match q.format.as_deref().unwrap_or("json") {
        "json" => Ok((
            [(header::CONTENT_TYPE, "application/json")],
            project.to_canonical_json(),
        )
            .into_response()),
        "screenplay" => Ok((
            [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
            screenplay(&project),
        )
            .into_response()),
        other => Err(ApiError::bad_request(format!(
            "unknown export format `{other}`; use json or screenplay"
        ))),
    }
}

#[derive(Deserialize)]
struct SusBody {
    #[serde(default)]
    responses: Option<Vec<SusRow>>,
    #[serde(default)]
    csv: Option<String>,
    #[serde(default)]
    adjusted_item_means: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct SusRow {
    respondent_id: String,
    raw: Vec<i64>,
}

async fn sus(body: Bytes) -> ApiResult<Json<Value>> {
    let body: SusBody = parse_body(&body)?;
    let report = match (body.responses, body.csv, body.adjusted_item_means) {
        (Some(rows), None, None) => {
            let responses = rows
                .iter()
                .map(|r| SusResponse::new(r.respondent_id.clone(), &r.raw))
                .collect::<Result<Vec<_>, _>>()?;
            analytics::sus_score(&responses)?
        }
        (None, Some(csv), None) => analytics::sus_score(&analytics::parse_csv(csv.as_bytes())?)?,
        (None, None, Some(means)) => {
            let means: [f64; 10] = means
                .try_into()
                .map_err(|_| ApiError::bad_request("adjusted_item_means needs ten values"))?;
            if means.iter().any(|m| !(0.0..=4.0).contains(m)) {
                return Err(ApiError::bad_request("adjusted item means lie in 0..=4"));
            }
            analytics::from_adjusted_item_means(means)
        }
        _ => {
            return Err(ApiError::bad_request(
                "give exactly one of responses, csv or adjusted_item_means",
            ))
        }
    };
    Ok(Json(serde_json::to_value(report).expect("reports serialize")))
}

#[derive(Deserialize)]
struct CompareBody {
    original: String,
    revised: String,
}

async fn compare(body: Bytes) -> ApiResult<Json<Value>> {
    let body: CompareBody = parse_body(&body)?;
    let report = analytics::compare(&body.original, &body.revised);
    Ok(Json(serde_json::to_value(report).expect("reports serialize")))
}

async fn job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let job = state
        .jobs
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .get(&id)
        .cloned()
        .ok_or_else(|| ApiError::from(Error::NotFound(format!("job {id}"))))?;
    Ok(Json(serde_json::to_value(job).expect("jobs serialize")))
}
