//! HTTP registry service.
//!
//! | Method | Path                        | Body / response                          |
//! |--------|-----------------------------|------------------------------------------|
//! | POST   | `/v1/search`                | `{query, mode, category?, tags?, top_k?}` → `{results}` |
//! | GET    | `/v1/skills/{id}`           | manifest entry with grades               |
//! | GET    | `/v1/skills/{id}/archive`   | `application/x-tar` package              |
//! | POST   | `/v1/skills`                | tar upload → 201 `{skill_id, grades}`    |
//! | GET    | `/v1/skills/{id}/relations` | `{skill_id, relations}`                  |
//! | GET    | `/v1/stats`                 | `{total_skills, per_category, per_dimension}` |
//!
//! Every non-2xx response is an [`ApiError`] body.

pub mod config;
pub mod error;
pub mod routes;

use std::future::Future;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use skillnet_core::curation::CurationConfig;
use skillnet_core::provider::CallCounter;
use skillnet_core::repository::{Repository, RepositoryConfig, RepositoryError};
use tokio::net::TcpListener;
use tokio::sync::Semaphore;

pub use config::{SandboxSettings, ServiceConfig};
pub use error::ApiError;

pub const TOKEN_HEADER: &str = "x-skillnet-token";

#[derive(Clone)]
pub struct AppState {
    pub repo: Arc<Repository>,
    pub config: Arc<ServiceConfig>,
    pub contributions: Arc<Semaphore>,
    pub provider_calls: CallCounter,
}

impl AppState {
    /// Opens the store named by `config.root` with the configured providers.
    pub fn open(config: ServiceConfig) -> Result<Self, RepositoryError> {
        let calls = CallCounter::new();
        let repo = Repository::open(
            &config.root,
            config.providers.embedder(&calls),
            config.providers.judge(&calls),
            config.sandbox.build(),
            RepositoryConfig {
                curation: CurationConfig {
                    workers: config.curation_workers.max(1),
                    ..CurationConfig::default()
                },
                ..RepositoryConfig::default()
            },
        )?;
        Ok(Self::with_repository(Arc::new(repo), config, calls))
    }

    pub fn with_repository(repo: Arc<Repository>, config: ServiceConfig, provider_calls: CallCounter) -> Self {
        AppState {
            contributions: Arc::new(Semaphore::new(config.max_concurrent_contributions.max(1))),
            repo,
            config: Arc::new(config),
            provider_calls,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/search", post(routes::search))
        .route("/v1/skills", post(routes::contribute))
        .route("/v1/skills/{id}", get(routes::get_skill))
        .route("/v1/skills/{id}/archive", get(routes::get_archive))
        .route("/v1/skills/{id}/relations", get(routes::relations))
        .route("/v1/stats", get(routes::stats))
        .fallback(routes::not_found)
        .method_not_allowed_fallback(routes::method_not_allowed)
        .layer(DefaultBodyLimit::max(state.config.max_upload_bytes))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

async fn log_request(request: Request, next: Next) -> Response {
    let started = Instant::now();
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let response = next.run(request).await;
    let timestamp_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    tracing::info!(
        target: "skillnet::access",
        timestamp_ms,
        method = %method,
        path = %path,
        status = response.status().as_u16(),
        millis = started.elapsed().as_millis() as u64,
        "request"
    );
    response
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let Some(expected) = state.config.auth_token.as_deref() else {
        return next.run(request).await;
    };
    let headers = request.headers();
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    let direct = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
    if bearer == Some(expected) || direct == Some(expected) {
        next.run(request).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or invalid token").into_response()
    }
}

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, root = %state.config.root.display(), "registry listening");
    }
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

/// Resolves on Ctrl-C.
pub async fn ctrl_c() {
    if tokio::signal::ctrl_c().await.is_err() {
        std::future::pending::<()>().await;
    }
}
