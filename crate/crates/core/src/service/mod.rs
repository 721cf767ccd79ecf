//! HTTP/JSON front end over scenario-engine sessions, under `/api/v1`.
//!
//! Every state change goes through [`advance_session`]; the service adds
//! storage, authentication and job tracking. Transitions of one session are
//! serialized by that session's writer lock, so concurrent answers never
//! interleave. Readers see the last committed record.

mod openapi;
mod store;

pub use openapi::document as openapi_document;
pub use store::{Datasets, Job, JobStatus, Role, SessionRecord, StoredDataset};

use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{read_csv, Causality, DomainPair, LabelSpace};
use crate::engine::{
    advance_session, canned_cases, illegal, Assertion, SessionInput, SessionState, Step, TestEvidence, TestRequest,
    Thresholds,
};
use crate::error::Error;
use store::{Slot, Store};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub token: String,
    pub max_upload_bytes: u64,
    /// Root seed of sessions created without one.
    pub seed: u64,
    pub level: f64,
}

pub struct App {
    cfg: ServiceConfig,
    owner: String,
    store: Store,
}

impl App {
    pub fn open(cfg: ServiceConfig) -> crate::Result<Arc<Self>> {
        let store = Store::open(&cfg.data_dir)?;
        Ok(Arc::new(Self {
            owner: token_hash(&cfg.token),
            cfg,
            store,
        }))
    }
}

fn token_hash(token: &str) -> String {
    Sha256::digest(token.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Error response: a status plus a JSON body with at least `error`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, msg: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": msg.into() }),
        }
    }
}

/// Pulls `row N` and ``column `x` `` out of a CSV error message.
fn csv_position(msg: &str) -> (Option<usize>, Option<String>) {
    let row = msg
        .split("row ")
        .nth(1)
        .and_then(|r| r.split(|c: char| !c.is_ascii_digit()).next())
        .and_then(|d| d.parse().ok());
    let column = msg.split("column `").nth(1).and_then(|c| c.split('`').next()).map(String::from);
    (row, column)
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match &e {
            Error::IllegalTransition { allowed, step, .. } => Self {
                status: StatusCode::CONFLICT,
                body: json!({ "error": msg, "step": step, "allowed_inputs": allowed }),
            },
            Error::Csv(m) => {
                let (row, column) = csv_position(m);
                Self {
                    status: StatusCode::BAD_REQUEST,
                    body: json!({ "error": msg, "row": row, "column": column }),
                }
            }
            Error::Io(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, msg),
            _ => Self::new(StatusCode::UNPROCESSABLE_ENTITY, msg),
        }
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn auth(State(app): State<Arc<App>>, req: Request, next: Next) -> Response {
    let ok = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|h| h.to_str().ok())
        .and_then(|h| h.strip_prefix("Bearer "))
        .is_some_and(|t| t.trim() == app.cfg.token);
    if !ok {
        let mut r = ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        r.headers_mut().insert(header::WWW_AUTHENTICATE, "Bearer".parse().expect("static header"));
        return r;
    }
    next.run(req).await
}

pub fn router(app: Arc<App>) -> Router {
    let limit = usize::try_from(app.cfg.max_upload_bytes).unwrap_or(usize::MAX);
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answer", post(answer))
        .route("/sessions/{id}/datasets", post(upload))
        .route("/sessions/{id}/tests", post(run_test))
        .route("/openapi.json", get(|| async { Json(openapi::document()) }))
        .layer(DefaultBodyLimit::max(limit))
        .layer(middleware::from_fn_with_state(app.clone(), auth))
        .with_state(app);
    Router::new().nest("/api/v1", api)
}

/// Serves until ctrl-c.
pub async fn serve(addr: &str, cfg: ServiceConfig) -> crate::Result<()> {
    let app = App::open(cfg)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn slot(app: &App, id: &str) -> ApiResult<Arc<Slot>> {
    let slot = app
        .store
        .get(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))?;
    if slot.snapshot().owner != app.owner {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "session belongs to another token"));
    }
    Ok(slot)
}

/// Applies `inputs` in order to the committed state, then attaches the
/// uploaded pair if the session is waiting for it. Caller holds the writer
/// lock.
fn apply(app: &App, slot: &Slot, inputs: Vec<SessionInput>) -> ApiResult<SessionRecord> {
    let rec = slot.snapshot();
    let pair = slot.pair();
    let t = now();
    let mut state = rec.state.clone();
    let mut applied = Vec::new();
    for input in inputs {
        state = advance_session(&state, &input, pair.as_deref(), t)?;
        applied.push(input);
    }
    if state.step == Step::AwaitData && pair.is_some() {
        let input = SessionInput::Data {
            pair_ref: Some(state.id.clone()),
        };
        state = advance_session(&state, &input, None, t)?;
        applied.push(input);
    }
    let rec = slot.commit(|r| {
        r.state = state;
        r.inputs.extend(applied);
        r.updated_at = t;
    })?;
    app.store.touch(&rec)?;
    Ok(rec)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    case: Option<String>,
    seed: Option<u64>,
}

async fn create_session(State(app): State<Arc<App>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateBody::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))?
    };
    let case = match &body.case {
        Some(key) => Some(
            canned_cases()
                .into_iter()
                .find(|c| &c.key == key)
                .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("unknown case `{key}`")))?,
        ),
        None => None,
    };
    let t = now();
    let id = uuid::Uuid::new_v4().to_string();
    let thresholds = Thresholds {
        level: app.cfg.level,
        ..Thresholds::default()
    };
    let state = SessionState::new(&id, body.seed.unwrap_or(app.cfg.seed), t).with_thresholds(thresholds);
    let rec = SessionRecord {
        state,
        owner: app.owner.clone(),
        inputs: Vec::new(),
        datasets: Datasets::default(),
        jobs: Vec::new(),
        created_at: t,
        updated_at: t,
    };
    let slot = app.store.insert(rec)?;
    let rec = match case {
        Some(c) => {
            let _w = slot.writer.lock().await;
            apply(&app, &slot, c.session_inputs())?
        }
        None => slot.snapshot(),
    };
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id, "step": rec.state.step }))))
}

/// Full session view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub step: Step,
    pub allowed_inputs: Vec<String>,
    pub state: SessionState,
    pub datasets: Datasets,
    pub jobs: Vec<Job>,
    /// Applied engine inputs, oldest first.
    pub inputs: Vec<SessionInput>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl From<SessionRecord> for SessionView {
    fn from(r: SessionRecord) -> Self {
        Self {
            session_id: r.state.id.clone(),
            step: r.state.step,
            allowed_inputs: r.state.step.allowed_inputs().iter().map(|s| s.to_string()).collect(),
            datasets: r.datasets,
            jobs: r.jobs,
            inputs: r.inputs,
            created_at: r.created_at,
            updated_at: r.updated_at,
            state: r.state,
        }
    }
}

async fn get_session(State(app): State<Arc<App>>, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    Ok(Json(slot(&app, &id)?.snapshot().into()))
}

/// Reply to an answer: the new step and, once diagnosed, the diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSummary {
    pub session_id: String,
    pub step: Step,
    pub allowed_inputs: Vec<String>,
    pub advisory: Option<String>,
    pub tests_run: Vec<String>,
    pub assertions: usize,
    pub diagnosis: Option<crate::engine::Diagnosis>,
}

impl From<&SessionRecord> for AnswerSummary {
    fn from(r: &SessionRecord) -> Self {
        let s = &r.state;
        Self {
            session_id: s.id.clone(),
            step: s.step,
            allowed_inputs: s.step.allowed_inputs().iter().map(|x| x.to_string()).collect(),
            advisory: s.advisory.clone(),
            tests_run: s
                .evidence
                .iter()
                .flat_map(|e| e.tests.iter().map(|t| t.name().to_string()))
                .collect(),
            assertions: s.evidence.as_ref().map_or(0, |e| e.expert_assertions.len()),
            diagnosis: s.diagnosis.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct AnswerBody {
    question: String,
    #[serde(default)]
    value: Value,
}

fn unprocessable(msg: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, msg)
}

fn answer_input(body: AnswerBody) -> ApiResult<SessionInput> {
    match body.question.as_str() {
        "causality" => {
            let v = body
                .value
                .as_str()
                .ok_or_else(|| unprocessable("causality value must be a string"))?;
            Ok(SessionInput::Causality {
                value: v.parse::<Causality>()?,
            })
        }
        "done_testing" => Ok(SessionInput::DoneTesting),
        "assertions" => {
            let assertions: Vec<Assertion> = serde_json::from_value(body.value)
                .map_err(|e| unprocessable(format!("assertions must be a list of {{claim, value, justification}}: {e}")))?;
            Ok(SessionInput::Assertions { assertions })
        }
        other => Err(unprocessable(format!(
            "unknown question `{other}`; expected causality, done_testing or assertions"
        ))),
    }
}

async fn answer(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<AnswerSummary>> {
    let slot = slot(&app, &id)?;
    let body: AnswerBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))?;
    let input = answer_input(body)?;
    let _w = slot.writer.lock().await;
    let rec = apply(&app, &slot, vec![input])?;
    Ok(Json((&rec).into()))
}

async fn upload(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    mut multipart: Multipart,
) -> ApiResult<Json<Value>> {
    let slot = slot(&app, &id)?;
    let too_large = |e: axum::extract::multipart::MultipartError| ApiError::new(e.status(), e.body_text());
    let (mut role, mut bytes) = (None, None);
    while let Some(field) = multipart.next_field().await.map_err(too_large)? {
        match field.name() {
            Some("role") => role = Some(field.text().await.map_err(too_large)?),
            Some("file") => bytes = Some(field.bytes().await.map_err(too_large)?),
            _ => {}
        }
    }
    let role: Role = role
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing `role` field"))?
        .parse()
        .map_err(|e: Error| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let bytes = bytes.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing `file` field"))?;
    if bytes.len() as u64 > app.cfg.max_upload_bytes {
        return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "dataset exceeds the upload limit"));
    }
    let ds = read_csv(&format!("{role:?}").to_lowercase(), bytes.as_ref())?;

    let _w = slot.writer.lock().await;
    let rec = slot.snapshot();
    if rec.datasets.get(role).is_some() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("{} dataset already stored; datasets are immutable", role.file_name()),
        ));
    }
    let stored = StoredDataset {
        file: role.file_name().into(),
        rows: ds.n(),
        columns: ds.d(),
        labeled: ds.is_labeled(),
        bytes: bytes.len(),
        uploaded_at: now(),
    };
    let other = match role {
        Role::Source => rec.datasets.target.as_ref(),
        Role::Target => rec.datasets.source.as_ref(),
    };
    let pair = match other {
        Some(o) => {
            let other_ds = read_csv(o.file.trim_end_matches(".csv"), std::fs::File::open(slot.dir.join(&o.file))?)?;
            let (s, t) = match role {
                Role::Source => (ds, other_ds),
                Role::Target => (other_ds, ds),
            };
            let space = LabelSpace::infer(&[&s, &t])?;
            Some(Arc::new(DomainPair::new(s, t, space)?))
        }
        None => None,
    };
    std::fs::write(slot.dir.join(&stored.file), &bytes)?;
    let validated = pair.is_some();
    *slot.pair.write().expect("pair lock") = pair;
    slot.commit(|r| r.datasets.set(role, stored.clone()))?;
    let rec = apply(&app, &slot, vec![])?;
    Ok(Json(json!({
        "role": role,
        "dataset": stored,
        "pair_validated": validated,
        "step": rec.state.step,
    })))
}

fn is_long(req: &TestRequest) -> bool {
    matches!(req, TestRequest::Mmd { .. } | TestRequest::FitSourceModel { .. })
}

async fn run_test(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Job>)> {
    let slot = slot(&app, &id)?;
    let value: Value =
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))?;
    let request: TestRequest = serde_json::from_value(value).map_err(|e| unprocessable(format!("unknown test: {e}")))?;
    let rec = slot.snapshot();
    let Some(pair) = slot.pair() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "both source and target datasets are required"));
    };
    if matches!(request, TestRequest::LabelShift | TestRequest::ClassConditional) && !pair.target.is_labeled() {
        return Err(Error::TargetLabelsRequired.into());
    }
    if rec.state.step != Step::Testing {
        return Err(illegal(rec.state.step, "run_test").into());
    }
    let job = Job {
        id: uuid::Uuid::new_v4().to_string(),
        request: request.clone(),
        status: JobStatus::Running,
        result: None,
        error: None,
        created_at: now(),
        finished_at: None,
    };
    slot.commit(|r| r.jobs.push(job.clone()))?;
    let handle = tokio::spawn(execute(app.clone(), slot.clone(), job.id.clone(), request.clone()));
    if is_long(&request) {
        return Ok((StatusCode::ACCEPTED, Json(job)));
    }
    let done = handle
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match done.status {
        JobStatus::Failed => Err(unprocessable(done.error.clone().unwrap_or_default())),
        _ => Ok((StatusCode::OK, Json(done))),
    }
}

/// Runs one test job under the session's writer lock and records the outcome.
async fn execute(app: Arc<App>, slot: Arc<Slot>, job_id: String, request: TestRequest) -> Job {
    let _w = slot.writer.lock().await;
    let input = SessionInput::RunTest { test: request };
    let worker = {
        let (app, slot) = (app.clone(), slot.clone());
        tokio::task::spawn_blocking(move || apply(&app, &slot, vec![input]))
    };
    let outcome: std::result::Result<TestEvidence, String> = match worker.await {
        Ok(Ok(rec)) => rec
            .state
            .evidence
            .and_then(|e| e.tests.last().cloned())
            .ok_or_else(|| "test produced no evidence".to_string()),
        Ok(Err(e)) => Err(e.body["error"].as_str().unwrap_or_default().to_string()),
        Err(e) => Err(e.to_string()),
    };
    let finished = now();
    let update = |j: &mut Job| {
        j.finished_at = Some(finished);
        match &outcome {
            Ok(ev) => {
                j.status = JobStatus::Done;
                j.result = Some(ev.clone());
            }
            Err(msg) => {
                j.status = JobStatus::Failed;
                j.error = Some(msg.clone());
            }
        }
    };
    let committed = slot.commit(|r| {
        if let Some(j) = r.jobs.iter_mut().find(|j| j.id == job_id) {
            update(j);
        }
    });
    match committed {
        Ok(rec) => rec.jobs.into_iter().find(|j| j.id == job_id).expect("job recorded"),
        Err(e) => {
            log::error!("persisting job {job_id}: {e}");
            let mut j = slot.snapshot().jobs.into_iter().find(|j| j.id == job_id).expect("job recorded");
            update(&mut j);
            j
        }
    }
}

#[cfg(test)]
mod tests;
