//! HTTP API over pipeline sessions stored under a data directory.

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use aclwright_core::comprehension::{BackendConfig, ChatBackend, ComprehendError, Diagnostic, Ir};
use aclwright_core::conflict::{ResolveWarning, ResolvedIntent};
use aclwright_core::deploy::{DeploymentPlan, Limits, Strategy};
use aclwright_core::flowset::Rule;
use aclwright_core::oracle::VerifyReport;
use aclwright_core::pipeline::{conflict_report, ConflictEntry, IntentState, PipelineError, RunDir, Session, Stage};
use aclwright_core::scenario::{generate_scenario, Scenario, ScenarioParams, Template};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub backend: BackendConfig,
    pub limits: Limits,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    cfg: ServiceConfig,
    backend: Arc<dyn ChatBackend>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        use PipelineError as P;
        let status = match &e {
            P::NoSuchIntent(_) => StatusCode::NOT_FOUND,
            P::Blocked { .. }
            | P::Transition(_)
            | P::NotApprovable { .. }
            | P::BadProtect { .. }
            | P::NothingToPlan
            | P::NoPlan(_)
            | P::NothingApplied
            | P::Comprehend(ComprehendError::RoundsExhausted { .. }) => StatusCode::CONFLICT,
            P::Comprehend(ComprehendError::Backend(_) | ComprehendError::Malformed { .. }) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntentView {
    pub intent_id: String,
    pub text: String,
    pub stage: Stage,
    pub round: u32,
    pub ir: Option<Ir>,
    pub diagnostics: Vec<Diagnostic>,
    pub rules: Vec<Rule>,
    pub protects: Vec<String>,
}

impl IntentView {
    fn of(session: &str, i: &IntentState) -> Self {
        Self {
            intent_id: format!("{session}-{}", i.id),
            text: i.text.clone(),
            stage: i.stage,
            round: i.round,
            ir: i.ir.clone(),
            diagnostics: i.diagnostics.clone(),
            rules: i.rules.clone(),
            protects: i.protects.iter().map(|p| p.text.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub scenario: String,
    pub intents: Vec<IntentView>,
}

impl SessionView {
    fn of(s: &Session) -> Self {
        Self {
            id: s.id().to_string(),
            scenario: s.scenario().name.clone(),
            intents: s.state().intents.iter().map(|i| IntentView::of(s.id(), i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConflictsView {
    pub intent_id: String,
    pub stage: Stage,
    pub conflicts: Vec<ConflictEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtectView {
    pub intent_id: String,
    pub stage: Stage,
    pub protect_flow_count: usize,
    pub warnings: Vec<ResolveWarning>,
    pub resolved: ResolvedIntent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApplyView {
    pub plan: DeploymentPlan,
    pub verification: VerifyReport,
}

/// Body of `POST /sessions`: an inline scenario, or generator parameters
/// (the composite fixture when absent). Scenario intents are drafted only
/// with `with_intents`.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    pub scenario: Option<Scenario>,
    pub template: Option<String>,
    pub seed: Option<u64>,
    pub params: Option<ScenarioParams>,
    pub with_intents: bool,
}

#[derive(Debug, Deserialize)]
pub struct TextBody {
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct FeedbackBody {
    pub feedback: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ProtectBody {
    pub text: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct StrategyQuery {
    pub strategy: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ConflictQuery {
    pub full_sets: bool,
}

fn parse_strategy(s: Option<&str>) -> Result<Strategy, ApiError> {
    s.map_or(Ok(Strategy::Optimized), |s| s.parse().map_err(ApiError::bad_request))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric())
}

/// `{session}-{index}` to its parts.
fn split_intent_id(id: &str) -> Result<(String, usize), ApiError> {
    id.rsplit_once('-')
        .and_then(|(s, k)| Some((s.to_string(), k.parse().ok()?)))
        .filter(|(s, _)| valid_id(s))
        .ok_or_else(|| ApiError::not_found(format!("no intent {id}")))
}

impl AppState {
    pub fn new(cfg: ServiceConfig, backend: Arc<dyn ChatBackend>) -> Self {
        Self(Arc::new(Inner { cfg, backend, sessions: Mutex::new(HashMap::new()) }))
    }

    fn sessions_root(&self) -> PathBuf {
        self.0.cfg.data_dir.join("sessions")
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let missing = || ApiError::not_found(format!("no session {id}"));
        if !valid_id(id) {
            return Err(missing());
        }
        let mut map = self.0.sessions.lock().expect("session map lock");
        if let Some(s) = map.get(id) {
            return Ok(s.clone());
        }
        let dir = self.sessions_root().join(id);
        if !dir.is_dir() {
            return Err(missing());
        }
        let mut s = Session::open(RunDir::create(dir).map_err(PipelineError::from)?)?.ok_or_else(missing)?;
        self.configure(&mut s);
        let s = Arc::new(Mutex::new(s));
        map.insert(id.to_string(), s.clone());
        Ok(s)
    }

    fn configure(&self, s: &mut Session) {
        s.backend_config = self.0.cfg.backend.clone();
        s.limits = self.0.cfg.limits;
    }

    fn create(&self, scenario: &Scenario, with_intents: bool) -> Result<SessionView, ApiError> {
        let mut map = self.0.sessions.lock().expect("session map lock");
        let root = self.sessions_root();
        let used = fs::read_dir(&root)
            .into_iter()
            .flatten()
            .filter_map(|e| e.ok()?.file_name().to_str()?.strip_prefix('s')?.parse::<u64>().ok())
            .chain(map.keys().filter_map(|k| k.strip_prefix('s')?.parse().ok()))
            .max();
        let id = format!("s{}", used.map_or(1, |n| n + 1));
        let dir = RunDir::create(root.join(&id)).map_err(PipelineError::from)?;
        let mut s = Session::open_or_create(dir, &id, scenario, with_intents)?;
        self.configure(&mut s);
        let view = SessionView::of(&s);
        map.insert(id, Arc::new(Mutex::new(s)));
        Ok(view)
    }

    /// Runs `f` on a session off the async workers, one call at a time.
    async fn with_session<T: Send + 'static>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session, &dyn ChatBackend) -> Result<T, ApiError> + Send + 'static,
    ) -> Result<T, ApiError> {
        let session = self.session(id)?;
        let backend = self.0.backend.clone();
        tokio::task::spawn_blocking(move || {
            let mut s = session.lock().expect("session lock");
            f(&mut s, backend.as_ref())
        })
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    }
}

async fn create_session(State(app): State<AppState>, Json(body): Json<CreateSession>) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let scenario = match body.scenario {
        Some(s) => s,
        None => {
            let mut params = body.params.unwrap_or(ScenarioParams { template: Template::Composite, ..Default::default() });
            if let Some(t) = &body.template {
                params.template = t.parse().map_err(ApiError::bad_request)?;
            }
            if let Some(seed) = body.seed {
                params.seed = seed;
            }
            if matches!(params.template, Template::Custom(_)) {
                return Err(ApiError::bad_request("file templates are not accepted over the API; send the scenario inline"));
            }
            tokio::task::spawn_blocking(move || generate_scenario(&params))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?
        }
    };
    let view = tokio::task::spawn_blocking(move || app.create(&scenario, body.with_intents))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionView> {
    app.with_session(&id, |s, _| Ok(SessionView::of(s))).await.map(Json)
}

async fn submit_intent(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<TextBody>,
) -> Result<(StatusCode, Json<IntentView>), ApiError> {
    if body.text.trim().is_empty() {
        return Err(ApiError::bad_request("intent text is empty"));
    }
    let view = app
        .with_session(&id, move |s, backend| {
            let k = s.add_intent(body.text.trim())?;
            s.comprehend(k, backend)?;
            Ok(IntentView::of(s.id(), s.intent(k)?))
        })
        .await?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn approve(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<IntentView> {
    let (sid, k) = split_intent_id(&id)?;
    app.with_session(&sid, move |s, _| {
        s.approve(k)?;
        Ok(IntentView::of(s.id(), s.intent(k)?))
    })
    .await
    .map(Json)
}

async fn feedback(State(app): State<AppState>, Path(id): Path<String>, Json(body): Json<FeedbackBody>) -> ApiResult<IntentView> {
    let (sid, k) = split_intent_id(&id)?;
    app.with_session(&sid, move |s, backend| {
        s.feedback(k, &body.feedback, backend)?;
        Ok(IntentView::of(s.id(), s.intent(k)?))
    })
    .await
    .map(Json)
}

async fn conflicts(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<ConflictQuery>) -> ApiResult<ConflictsView> {
    let (sid, k) = split_intent_id(&id)?;
    app.with_session(&sid, move |s, _| {
        let records = s.conflicts(k)?;
        Ok(ConflictsView {
            intent_id: id,
            stage: s.intent(k)?.stage,
            conflicts: conflict_report(&records, &s.engine().ctx, q.full_sets),
        })
    })
    .await
    .map(Json)
}

async fn protect(State(app): State<AppState>, Path(id): Path<String>, body: Option<Json<ProtectBody>>) -> ApiResult<ProtectView> {
    let (sid, k) = split_intent_id(&id)?;
    let text = body.and_then(|Json(b)| b.text);
    app.with_session(&sid, move |s, backend| {
        let r = s.protect(k, text.as_deref(), backend)?;
        Ok(ProtectView {
            intent_id: id,
            stage: s.intent(k)?.stage,
            protect_flow_count: r.resolved.protect_flows.count(),
            warnings: r.warnings,
            resolved: r.resolved,
        })
    })
    .await
    .map(Json)
}

async fn plan(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<StrategyQuery>) -> ApiResult<DeploymentPlan> {
    let strategy = parse_strategy(q.strategy.as_deref())?;
    app.with_session(&id, move |s, _| Ok(s.plan(strategy)?)).await.map(Json)
}

/// Applies the chosen plan and verifies the result.
async fn apply(State(app): State<AppState>, Path(id): Path<String>, body: Option<Json<StrategyQuery>>) -> ApiResult<ApplyView> {
    let strategy = parse_strategy(body.as_ref().and_then(|Json(b)| b.strategy.as_deref()))?;
    app.with_session(&id, move |s, _| {
        let plan = s.apply(strategy)?;
        Ok(ApplyView { plan, verification: s.verify()? })
    })
    .await
    .map(Json)
}

async fn verification(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<VerifyReport> {
    app.with_session(&id, |s, _| s.verification()?.ok_or_else(|| PipelineError::NothingApplied.into())).await.map(Json)
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/intents", post(submit_intent))
        .route("/sessions/{id}/plan", get(plan))
        .route("/sessions/{id}/apply", post(apply))
        .route("/sessions/{id}/verification", get(verification))
        .route("/intents/{id}/approve", post(approve))
        .route("/intents/{id}/feedback", post(feedback))
        .route("/intents/{id}/conflicts", get(conflicts))
        .route("/intents/{id}/protect", post(protect))
        .with_state(app)
}

/// Serves the API until the process ends.
pub async fn serve(addr: SocketAddr, app: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(app)).await
}
