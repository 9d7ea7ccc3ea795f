//! HTTP facade over an [`Engine`].
//!
//! * `GET /health` answers `ok` once the engine is loaded.
//! * `POST /recommend` takes a [`RecommendRequest`] and returns a
//!   [`Recommendation`].
//! * `POST /feedback` takes `{"campaign", "variant", "reward": 0|1}` and
//!   returns the variant's updated posterior.
//!
//! Until the engine is installed every endpoint answers 503. Bad JSON,
//! unknown campaigns, variants or items and invalid values answer 400 with
//! `{"error": "..."}`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Engine, PipelineError, RecommendRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub campaign: String,
    pub variant: String,
    pub reward: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub campaign: String,
    pub variant: String,
    pub alpha: f64,
    pub beta: f64,
}

/// Shared handle to an engine that may still be loading.
#[derive(Debug, Clone, Default)]
pub struct ServiceState {
    engine: Arc<OnceLock<Arc<Engine>>>,
}

impl ServiceState {
    pub fn pending() -> Self {
        Self::default()
    }

    pub fn ready(engine: Engine) -> Self {
        let s = Self::default();
        s.install(engine);
        s
    }

    /// Makes the engine visible to handlers. Later calls are ignored.
    pub fn install(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn engine(&self) -> Option<Arc<Engine>> {
        self.engine.get().cloned()
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn warming_up() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "warming up")
}

fn pipeline_error(e: PipelineError) -> Response {
    let status = match e {
        PipelineError::UnknownCampaign(_)
        | PipelineError::UnknownVariant(_)
        | PipelineError::UnknownItem(_)
        | PipelineError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    error(status, e.to_string())
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, Box<Response>> {
    serde_json::from_slice(body).map_err(|e| {
        Box::new(error(
            StatusCode::BAD_REQUEST,
            format!("invalid request body: {e}"),
        ))
    })
}

async fn health(State(state): State<ServiceState>) -> Response {
    match state.engine() {
        Some(_) => (StatusCode::OK, "ok").into_response(),
        None => (StatusCode::SERVICE_UNAVAILABLE, "warming up").into_response(),
    }
}

async fn recommend(State(state): State<ServiceState>, body: Bytes) -> Response {
    let Some(engine) = state.engine() else {
        return warming_up();
    };
    let req: RecommendRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    if engine.campaign(&req.campaign).is_none() {
        return pipeline_error(PipelineError::UnknownCampaign(req.campaign));
    }
    match tokio::task::spawn_blocking(move || engine.recommend(&req)).await {
        Ok(Ok(rec)) => Json(rec).into_response(),
        Ok(Err(e)) => pipeline_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn feedback(State(state): State<ServiceState>, body: Bytes) -> Response {
    let Some(engine) = state.engine() else {
        return warming_up();
    };
    let req: FeedbackRequest = match parse(&body) {
        Ok(r) => r,
        Err(resp) => return *resp,
    };
    match engine.feedback(&req.campaign, &req.variant, req.reward) {
        Ok((alpha, beta)) => Json(FeedbackResponse {
            campaign: req.campaign,
            variant: req.variant,
            alpha,
            beta,
        })
        .into_response(),
        Err(e) => pipeline_error(e),
    }
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/recommend", post(recommend))
        .route("/feedback", post(feedback))
        .with_state(state)
}

/// Binds `addr`, loads the campaigns file in the background and serves
/// until Ctrl-C. A campaigns file that fails to load stops the server with
/// an error.
pub async fn serve(addr: SocketAddr, campaigns: PathBuf) -> std::io::Result<()> {
    let state = ServiceState::pending();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let (failed_tx, failed_rx) = tokio::sync::oneshot::channel::<String>();
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match Engine::load(&campaigns) {
        Ok(engine) => {
            log::info!("loaded {} items", engine.catalog().len());
            loader.install(engine);
        }
        Err(e) => {
            let _ = failed_tx.send(format!("failed to load {}: {e}", campaigns.display()));
        }
    });
    let failure = Arc::new(OnceLock::new());
    let shutdown_failure = failure.clone();
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async move {
            let load_failed = async {
                match failed_rx.await {
                    Ok(msg) => msg,
                    Err(_) => std::future::pending().await,
                }
            };
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                msg = load_failed => { let _ = shutdown_failure.set(msg); }
            }
        })
        .await?;
    match failure.get() {
        Some(msg) => Err(std::io::Error::other(msg.clone())),
        None => Ok(()),
    }
}
