//! HTTP front end over a loaded [`PipelineBundle`].
//!
//! | route              | body                | response                                   |
//! |--------------------|---------------------|--------------------------------------------|
//! | `POST /api/annotate` | `{"text": "..."}` | `{"sentences": [[{word,pos,chunk,ner}]]}`  |
//! | `GET /api/labels`  |                     | label sets with descriptions               |
//! | `GET /api/health`  |                     | `{"status": "ok", ...versions}`            |
//!
//! Failures carry `{"error": message}`: 400 for a malformed body, 422 when
//! the tokenizer rejects the text, 500 otherwise.

use std::sync::Arc;

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use log::{debug, warn};
use serde::Deserialize;
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use seqlab_core::pipeline::{label_catalog, PipelineBundle};
use seqlab_core::Error;

/// Which browser origins may call the API.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CorsPolicy {
    #[default]
    AnyOrigin,
    Origins(Vec<String>),
    Disabled,
}

impl CorsPolicy {
    fn layer(&self) -> anyhow::Result<Option<CorsLayer>> {
        let origin = match self {
            CorsPolicy::Disabled => return Ok(None),
            CorsPolicy::AnyOrigin => AllowOrigin::from(Any),
            CorsPolicy::Origins(list) => {
                let values = list
                    .iter()
                    .map(|o| HeaderValue::from_str(o).with_context(|| format!("bad CORS origin `{o}`")))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                AllowOrigin::list(values)
            }
        };
        Ok(Some(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        ))
    }
}

struct AppState {
    bundle: Arc<PipelineBundle>,
    health: String,
    labels: String,
}

#[derive(Deserialize)]
struct AnnotateRequest {
    text: String,
}

pub fn router(bundle: Arc<PipelineBundle>, cors: &CorsPolicy) -> anyhow::Result<Router> {
    let manifest = bundle.manifest();
    let health = json!({
        "status": "ok",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": manifest.library_version,
        "bundle_version": manifest.bundle_version,
        "model_format": manifest.model_format,
        "models": {
            "pos": manifest.pos.fingerprint,
            "chunk": manifest.chunk.fingerprint,
            "ner": manifest.ner.fingerprint,
        },
    });
    let state = Arc::new(AppState {
        bundle,
        health: health.to_string(),
        labels: serde_json::to_string(&label_catalog())?,
    });
    let mut app = Router::new()
        .route("/api/annotate", post(annotate))
        .route("/api/labels", get(labels))
        .route("/api/health", get(health_check))
        .fallback(not_found)
        .with_state(state);
    if let Some(layer) = cors.layer()? {
        app = app.layer(layer);
    }
    Ok(app)
}

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_body(status: StatusCode, message: String) -> Response {
    json_body(status, json!({ "error": message }).to_string())
}

async fn annotate(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: AnnotateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")),
    };
    debug!("annotate: {} bytes", request.text.len());
    let bundle = state.bundle.clone();
    let result = tokio::task::spawn_blocking(move || bundle.annotate(&request.text)?.to_json()).await;
    match result {
        Ok(Ok(doc)) => json_body(StatusCode::OK, doc),
        Ok(Err(e @ Error::Tokenizer(_))) => error_body(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Ok(Err(e)) => {
            warn!("annotate failed: {e}");
            error_body(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(e) => error_body(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")),
    }
}

async fn labels(State(state): State<Arc<AppState>>) -> Response {
    json_body(StatusCode::OK, state.labels.clone())
}

async fn health_check(State(state): State<Arc<AppState>>) -> Response {
    json_body(StatusCode::OK, state.health.clone())
}

async fn not_found() -> Response {
    error_body(StatusCode::NOT_FOUND, "no such endpoint".into())
}

/// Runs until ctrl-c. The listener is bound by the caller so that binding
/// errors surface before anything is announced.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
