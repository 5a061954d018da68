//! HTTP/JSON service over classification and generation.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use repetition_core::generator::{classify_tokens, generate_piece, render_midi, GenerationOptions, GenerationRequest, Piece};
use repetition_core::model::checkpoint;
use repetition_core::model::{ModelConfig, ModelState, Variant};
use repetition_core::rules::{Classifier, RepetitionType, Verdict};
use repetition_core::symbolic::{TokenMatrix, MAX_LEN};
use repetition_core::Error as CoreError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::timeout::TimeoutLayer;

use crate::{CliError, CliResult};

pub const ENV_BIND: &str = "REPETITION_BIND";
pub const ENV_CHECKPOINT: &str = "REPETITION_CHECKPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub checkpoint: Option<PathBuf>,
    /// Largest accepted motif, in valid rows.
    pub max_motif_len: usize,
    /// Largest accepted number of generation steps.
    pub max_labels: usize,
    /// Origins allowed by CORS; empty disables CORS headers.
    pub cors_allowlist: Vec<String>,
    pub request_timeout_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            checkpoint: None,
            max_motif_len: MAX_LEN,
            max_labels: 64,
            cors_allowlist: Vec::new(),
            request_timeout_secs: 30,
        }
    }
}

impl ServiceConfig {
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(b) = get(ENV_BIND).filter(|s| !s.is_empty()) {
            self.bind = b;
        }
        if let Some(c) = get(ENV_CHECKPOINT).filter(|s| !s.is_empty()) {
            self.checkpoint = Some(PathBuf::from(c));
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.bind
            .parse::<SocketAddr>()
            .map_err(|e| CliError::Config(format!("bind {:?}: {e}", self.bind)))?;
        if self.max_motif_len == 0 || self.max_motif_len > MAX_LEN {
            return Err(CliError::Config(format!("max_motif_len must be in 1..={MAX_LEN}")));
        }
        if self.max_labels == 0 {
            return Err(CliError::Config("max_labels must be positive".into()));
        }
        if self.request_timeout_secs == 0 {
            return Err(CliError::Config("request_timeout_secs must be positive".into()));
        }
        for origin in &self.cors_allowlist {
            HeaderValue::from_str(origin).map_err(|_| CliError::Config(format!("invalid CORS origin {origin:?}")))?;
        }
        Ok(())
    }
}

struct Loaded {
    state: ModelState,
    sha256: String,
}

/// Shared read-only service state.
#[derive(Clone)]
pub struct AppState {
    model: Option<Arc<Loaded>>,
    limits: Arc<ServiceConfig>,
}

impl AppState {
    /// Load the configured checkpoint; a configured but unreadable or
    /// incompatible checkpoint is an error.
    pub fn load(config: &ServiceConfig) -> CliResult<Self> {
        config.validate()?;
        let model = match &config.checkpoint {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
                let state = checkpoint::from_bytes(&bytes)?;
                log::info!("loaded {} model from {}", state.config.variant, path.display());
                Some(Loaded {
                    sha256: checkpoint::digest_hex(&bytes),
                    state,
                })
            }
            None => {
                log::warn!("no checkpoint configured; generation and model endpoints answer 503");
                None
            }
        };
        Ok(Self::new(model.map(|m| (m.state, m.sha256)), config.clone()))
    }

    pub fn new(model: Option<(ModelState, String)>, config: ServiceConfig) -> Self {
        Self {
            model: model.map(|(state, sha256)| Arc::new(Loaded { state, sha256 })),
            limits: Arc::new(config),
        }
    }

    fn model(&self) -> Result<Arc<Loaded>, ApiError> {
        self.model
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded"))
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    path: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            path: None,
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::Io(_) | CoreError::Json(_) | CoreError::Checkpoint(_) | CoreError::ShapeMismatch { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.message,
            path: self.path,
        };
        (self.status, Json(body)).into_response()
    }
}

/// Parse a JSON body; schema violations become 400 with the field path.
fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("body is not UTF-8: {e}")))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: inner.to_string(),
            path: (path != ".").then_some(path),
        }
    })
}

fn check_motif(name: &str, m: &TokenMatrix, limits: &ServiceConfig) -> Result<(), ApiError> {
    if m.valid_len() == 0 {
        return Err(ApiError::invalid(format!("{name}: empty motif")));
    }
    if m.valid_len() > limits.max_motif_len {
        return Err(ApiError::invalid(format!(
            "{name}: {} rows exceed the limit of {}",
            m.valid_len(),
            limits.max_motif_len
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyRequest {
    pub motif_a: TokenMatrix,
    pub motif_b: TokenMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub motif: TokenMatrix,
    pub candidate: TokenMatrix,
    /// When given, the response says whether the candidate has this type.
    #[serde(default)]
    pub requested: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResponse {
    pub label: String,
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub motif: TokenMatrix,
    pub labels: Vec<String>,
    #[serde(default)]
    pub t: Vec<Option<i32>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub chaining: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub piece: Piece,
    /// Verdict of every generated motif against its source, in order.
    pub labels: Vec<Option<Verdict>>,
    pub midi_base64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInfo {
    pub config: ModelConfig,
    pub variant: Variant,
    pub checkpoint_sha256: String,
    pub step: u64,
}

fn parse_label(s: &str) -> Result<RepetitionType, ApiError> {
    s.parse()
        .map_err(|_| ApiError::invalid(format!("unknown label {s:?} (expected StR, TrR, SuR, HoR or SyR)")))
}

async fn classify(State(app): State<AppState>, body: Bytes) -> Result<Json<Verdict>, ApiError> {
    let req: ClassifyRequest = parse(&body)?;
    check_motif("motif_a", &req.motif_a, &app.limits)?;
    check_motif("motif_b", &req.motif_b, &app.limits)?;
    let label = classify_tokens(&req.motif_a, &req.motif_b, &Classifier::default())?;
    Ok(Json(label.into()))
}

async fn check(State(app): State<AppState>, body: Bytes) -> Result<Json<CheckResponse>, ApiError> {
    let req: CheckRequest = parse(&body)?;
    check_motif("motif", &req.motif, &app.limits)?;
    check_motif("candidate", &req.candidate, &app.limits)?;
    let requested = req.requested.as_deref().map(parse_label).transpose()?;
    let label = classify_tokens(&req.motif, &req.candidate, &Classifier::default())?;
    Ok(Json(CheckResponse {
        label: label.name().to_string(),
        detail: label.detail(),
        matches: requested.map(|r| label.matches(r)),
    }))
}

async fn generate(State(app): State<AppState>, body: Bytes) -> Result<Json<GenerateResponse>, ApiError> {
    let req: GenerateRequest = parse(&body)?;
    check_motif("motif", &req.motif, &app.limits)?;
    if req.labels.len() > app.limits.max_labels {
        return Err(ApiError::invalid(format!("{} labels exceed the limit of {}", req.labels.len(), app.limits.max_labels)));
    }
    let labels = req.labels.iter().map(|l| parse_label(l)).collect::<Result<Vec<_>, _>>()?;
    let model = app.model()?;
    let mut request = GenerationRequest::new(req.motif, labels);
    request.t = req.t;
    request.seed = req.seed;
    request.chaining = req.chaining.unwrap_or(true);
    request.validate()?;
    let response = tokio::task::spawn_blocking(move || -> Result<GenerateResponse, CoreError> {
        let options = GenerationOptions {
            rules: model.state.config.variant.uses_rules(),
            copy_without_model: false,
        };
        let piece = generate_piece(&request, Some(&model.state), options)?;
        let midi = render_midi(&piece)?;
        Ok(GenerateResponse {
            labels: piece.motifs.iter().skip(1).map(|m| m.verdict.clone()).collect(),
            midi_base64: base64::engine::general_purpose::STANDARD.encode(midi),
            piece,
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("generation task failed: {e}")))??;
    Ok(Json(response))
}

async fn model_info(State(app): State<AppState>) -> Result<Json<ModelInfo>, ApiError> {
    let m = app.model()?;
    Ok(Json(ModelInfo {
        config: m.state.config.clone(),
        variant: m.state.config.variant,
        checkpoint_sha256: m.sha256.clone(),
        step: m.state.step,
    }))
}

async fn health(State(app): State<AppState>) -> impl IntoResponse {
    Json(serde_json::json!({ "status": "ok", "model_loaded": app.model.is_some() }))
}

pub fn router(app: AppState) -> Router {
    let limits = app.limits.clone();
    let mut router = Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/check", post(check))
        .route("/v1/generate", post(generate))
        .route("/v1/model", get(model_info))
        .route("/v1/health", get(health))
        .with_state(app)
        .layer(TimeoutLayer::with_status_code(
            StatusCode::SERVICE_UNAVAILABLE,
            Duration::from_secs(limits.request_timeout_secs),
        ));
    if !limits.cors_allowlist.is_empty() {
        let origins: Vec<HeaderValue> = limits.cors_allowlist.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
        router = router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list(origins))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    router
}

pub async fn serve(config: ServiceConfig, app: AppState) -> CliResult<()> {
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|e| CliError::io(std::path::Path::new(&config.bind), e))?;
    log::info!("listening on {}", config.bind);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io(std::path::Path::new(&config.bind), e))
}
