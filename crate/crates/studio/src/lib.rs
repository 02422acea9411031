//! HTTP API for the rule studio: parse previews, prompt building and
//! completion, candidate validation and token-gated commits.

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as JsonValue};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use ubsr_core::ir::Concept;
use ubsr_core::parser::{parse, render_sexpr, token_count, ParseError};
use ubsr_core::registry::{LanguageEntry, LanguageId, Registry, RegistryError};
use ubsr_core::rulegen::{
    build_base_rule_prompt, parse_base_rule_response, prompt_hash, validate_candidate, BaseRuleRequest, Completer,
    GenerationLimits, PromptBundle, PromptError, Pruning, TestCase, ValidationReport,
};
use ubsr_core::rules::{commit_rule, load_rules, read_version, RuleEntry, RuleError, SyntacticRule};

pub const DEFAULT_TOKEN_TTL: Duration = Duration::from_secs(600);

pub struct StudioConfig {
    pub registry: Registry,
    pub rules_dir: PathBuf,
    pub completer: Arc<dyn Completer>,
    pub limits: GenerationLimits,
    pub token_ttl: Duration,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub bearer_token: Option<String>,
    /// Allowed browser origin; any origin when `None`.
    pub cors_origin: Option<String>,
}

impl StudioConfig {
    pub fn new(registry: Registry, rules_dir: impl Into<PathBuf>, completer: Arc<dyn Completer>) -> Self {
        Self {
            registry,
            rules_dir: rules_dir.into(),
            completer,
            limits: GenerationLimits::default(),
            token_ttl: DEFAULT_TOKEN_TTL,
            bearer_token: None,
            cors_origin: None,
        }
    }
}

struct Grant {
    rule: SyntacticRule,
    issued: Instant,
}

struct AppState {
    cfg: StudioConfig,
    grants: Mutex<HashMap<String, Grant>>,
    counter: AtomicU64,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        Self {
            status,
            code,
            message: message.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<RegistryError> for ApiError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::Unregistered(_) => Self::new(StatusCode::BAD_REQUEST, "unknown_language", e),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other),
        }
    }
}

impl From<ParseError> for ApiError {
    fn from(e: ParseError) -> Self {
        match e {
            ParseError::Unregistered(_) => Self::new(StatusCode::BAD_REQUEST, "unknown_language", e),
            other => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "parse_failed", other),
        }
    }
}

impl From<PromptError> for ApiError {
    fn from(e: PromptError) -> Self {
        match e {
            PromptError::Registry(r) => r.into(),
            PromptError::Parse(p) => p.into(),
            PromptError::ParadigmMismatch { .. } => Self::new(StatusCode::CONFLICT, "paradigm_mismatch", e),
            other => Self::new(StatusCode::BAD_REQUEST, "bad_request", other),
        }
    }
}

impl From<RuleError> for ApiError {
    fn from(e: RuleError) -> Self {
        match e {
            RuleError::StaleVersion { .. } => Self::new(StatusCode::CONFLICT, "stale_version", e),
            RuleError::Duplicate { .. } => Self::new(StatusCode::CONFLICT, "duplicate_rule", e),
            RuleError::Locked(_) => Self::new(StatusCode::CONFLICT, "commit_in_progress", e),
            RuleError::MissingDir(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "rules_unavailable", e),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e))
}

/// Reads a rule from `{language, ast_node_type, ubsr_node_type, extractor,
/// test_snippet, expected}`; any defect is a 422.
fn candidate_rule(value: &JsonValue, registry: &Registry) -> Result<SyntacticRule, ApiError> {
    let bad = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_rule", m);
    let mut obj = value
        .as_object()
        .cloned()
        .ok_or_else(|| bad("candidate_rule must be an object".into()))?;
    let mut take = |k: &str| match obj.remove(k) {
        Some(JsonValue::String(s)) => Ok(s),
        _ => Err(bad(format!("candidate_rule.{k} must be a string"))),
    };
    let language = take("language")?;
    let node_type = take("ast_node_type")?;
    if node_type.is_empty() {
        return Err(bad("candidate_rule.ast_node_type is empty".into()));
    }
    registry.get(&language)?;
    let entry = RuleEntry::from_json(&JsonValue::Object(obj)).map_err(|e| bad(e.to_string()))?;
    Ok(entry.into_rule(LanguageId::new(language), node_type))
}

pub fn router(cfg: StudioConfig) -> Router {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION]);
    let cors = match cfg.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => cors.allow_origin(AllowOrigin::exact(origin)),
        _ => cors.allow_origin(Any),
    };
    let state = Arc::new(AppState {
        cfg,
        grants: Mutex::new(HashMap::new()),
        counter: AtomicU64::new(0),
    });
    Router::new()
        .route("/languages", get(languages))
        .route("/rules/version", get(rules_version))
        .route("/parse-preview", post(parse_preview))
        .route("/rule/generate", post(generate))
        .route("/rule/validate", post(validate))
        .route("/rule/commit", post(commit))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .layer(cors)
        .with_state(state)
}

async fn auth(State(st): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if let Some(expected) = &st.cfg.bearer_token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == expected);
        if !ok && req.method() != Method::OPTIONS {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

async fn languages(State(st): State<Arc<AppState>>) -> Json<Vec<LanguageEntry>> {
    Json(st.cfg.registry.languages.clone())
}

async fn rules_version(State(st): State<Arc<AppState>>) -> ApiResult<JsonValue> {
    Ok(Json(json!({"version": read_version(&st.cfg.rules_dir)?})))
}

#[derive(Debug, Deserialize)]
struct PreviewRequest {
    code: String,
    language: String,
    #[serde(default = "no_pruning")]
    pruning: Pruning,
    concept: Option<Concept>,
}

fn no_pruning() -> Pruning {
    Pruning::None
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PreviewResponse {
    pub rendered: String,
    pub token_count: usize,
    pub unpruned_token_count: usize,
    pub notes: Vec<String>,
}

async fn parse_preview(State(st): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<PreviewResponse> {
    let req: PreviewRequest = body(&bytes)?;
    let entry = st.cfg.registry.get(&req.language)?;
    let mut tree = parse(&req.code, entry.language.as_str(), &st.cfg.registry)?;
    let db = load_rules(&st.cfg.rules_dir)?;
    tree.tag_with(|k| db.concept_of(entry.language.as_str(), k));
    let concepts: BTreeSet<Concept> = match req.concept {
        Some(c) => BTreeSet::from([c]),
        None => Concept::ALL.into_iter().collect(),
    };
    let (pruned, note) = req.pruning.apply(&tree, &concepts);
    let rendered = render_sexpr(&pruned);
    Ok(Json(PreviewResponse {
        token_count: token_count(&rendered),
        unpruned_token_count: token_count(&render_sexpr(&tree)),
        rendered,
        notes: note.into_iter().collect(),
    }))
}

#[derive(Debug, Deserialize)]
struct GenerateRequest {
    #[serde(flatten)]
    request: BaseRuleRequest,
    #[serde(default)]
    dry: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub prompt: PromptBundle,
    pub response: Option<String>,
    pub candidate_rule: Option<SyntacticRule>,
    pub claimed_output: Option<String>,
    pub parse_error: Option<String>,
}

async fn generate(State(st): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<GenerateResponse> {
    let req: GenerateRequest = body(&bytes)?;
    let db = load_rules(&st.cfg.rules_dir)?;
    let prompt = build_base_rule_prompt(&req.request, &st.cfg.registry, &db)?;
    if req.dry {
        return Ok(Json(GenerateResponse {
            prompt,
            response: None,
            candidate_rule: None,
            claimed_output: None,
            parse_error: None,
        }));
    }
    let completer = st.cfg.completer.clone();
    let limits = st.cfg.limits;
    let text = prompt.rendered.clone();
    let response = tokio::task::spawn_blocking(move || completer.complete(&text, &limits))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e))?
        .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "completer_failed", e))?;
    let (candidate_rule, claimed_output, parse_error) = match parse_base_rule_response(&response, &req.request.test_language) {
        Ok(p) => (Some(p.rule), p.claimed_output, None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(Json(GenerateResponse {
        prompt,
        response: Some(response),
        candidate_rule,
        claimed_output,
        parse_error,
    }))
}

#[derive(Debug, Deserialize)]
struct ValidateRequest {
    candidate_rule: JsonValue,
    /// Defaults to the rule's own test snippet and expected value.
    #[serde(default)]
    test_cases: Option<Vec<TestCase>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub report: ValidationReport,
    pub accept_token: Option<String>,
}

async fn validate(State(st): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<ValidateResponse> {
    let req: ValidateRequest = body(&bytes)?;
    let rule = candidate_rule(&req.candidate_rule, &st.cfg.registry)?;
    let cases = req.test_cases.unwrap_or_else(|| {
        vec![TestCase {
            snippet: rule.test_snippet.clone(),
            expected: rule.expected.clone(),
        }]
    });
    let report = validate_candidate(&rule, &cases);
    let accept_token = report.accepted().map(|r| {
        let n = st.counter.fetch_add(1, Ordering::Relaxed);
        let now = SystemTime::now().duration_since(SystemTime::UNIX_EPOCH).unwrap_or_default();
        let seed = format!("{n}:{}:{}", now.as_nanos(), serde_json::to_string(r).unwrap_or_default());
        let token = prompt_hash(&seed);
        let mut grants = st.grants.lock().expect("grant lock");
        grants.retain(|_, g| g.issued.elapsed() < st.cfg.token_ttl);
        grants.insert(
            token.clone(),
            Grant {
                rule: r.clone(),
                issued: Instant::now(),
            },
        );
        token
    });
    Ok(Json(ValidateResponse { report, accept_token }))
}

#[derive(Debug, Deserialize)]
struct CommitRequest {
    candidate_rule: JsonValue,
    version: u64,
    accept_token: Option<String>,
}

async fn commit(State(st): State<Arc<AppState>>, bytes: Bytes) -> ApiResult<JsonValue> {
    let req: CommitRequest = body(&bytes)?;
    let rule = candidate_rule(&req.candidate_rule, &st.cfg.registry)?;
    let forbidden = |m: &str| ApiError::new(StatusCode::FORBIDDEN, "not_accepted", m);
    let token = req.accept_token.ok_or_else(|| forbidden("commit requires an accept token from /rule/validate"))?;
    {
        let grants = st.grants.lock().expect("grant lock");
        let grant = grants
            .get(&token)
            .ok_or_else(|| forbidden("unknown or already used accept token"))?;
        if grant.issued.elapsed() >= st.cfg.token_ttl {
            return Err(forbidden("accept token expired"));
        }
        if grant.rule != rule {
            return Err(forbidden("accept token was issued for a different rule"));
        }
    }
    // A failed commit (stale version, duplicate) leaves the token usable.
    let version = commit_rule(&st.cfg.rules_dir, &rule, req.version)?;
    st.grants.lock().expect("grant lock").remove(&token);
    Ok(Json(json!({"version": version, "rule": rule})))
}

/// Serves the studio API on `addr` until the process exits.
pub async fn serve(addr: SocketAddr, cfg: StudioConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(cfg)).await
}
