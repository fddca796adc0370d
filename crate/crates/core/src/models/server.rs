//! HTTP server replaying a [`MockTable`].
//!
//! * `GET /info` returns the table's [`ModelInfo`](super::ModelInfo).
//! * `POST /logits` takes a [`QueryContext`] body and returns
//!   `{"logits": [...]}`.
//!
//! Malformed bodies get 400. With [`ServerOptions::strict_visual`] set, a
//! visual id that appears in no table key gets 404; otherwise every miss
//! falls back to the default vector.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::sync::oneshot;

use super::{LogitSource, MockTable, QueryContext};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, Default)]
pub struct ServerOptions {
    pub strict_visual: bool,
}

#[derive(Clone)]
struct AppState {
    table: Arc<MockTable>,
    options: ServerOptions,
}

pub fn router(table: Arc<MockTable>, options: ServerOptions) -> Router {
    Router::new()
        .route("/info", get(info))
        .route("/logits", post(logits))
        .with_state(AppState { table, options })
}

async fn info(State(state): State<AppState>) -> Json<super::ModelInfo> {
    Json(state.table.info().clone())
}

fn error(status: StatusCode, message: String) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn logits(State(state): State<AppState>, body: String) -> Response {
    let ctx: QueryContext = match serde_json::from_str(&body) {
        Ok(ctx) => ctx,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    tracing::info!(
        visual_id = %ctx.visual,
        fusion_text = %ctx.fusion_text,
        llm_text = %ctx.llm_text,
        prefix_tokens = ?ctx.prefix_tokens,
        "logits request"
    );
    if state.options.strict_visual && !state.table.visual_ids().contains(&ctx.visual) {
        return error(
            StatusCode::NOT_FOUND,
            format!("unknown visual_id {:?}", ctx.visual.as_str()),
        );
    }
    match state.table.next_logits(&ctx) {
        Ok(v) => Json(json!({ "logits": v.values() })).into_response(),
        Err(e @ ModelError::TokenOutOfRange { .. }) => error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Binds `address` and serves until `shutdown` resolves.
pub async fn serve_mock(
    table: Arc<MockTable>,
    address: &str,
    options: ServerOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ModelError> {
    let listener = tokio::net::TcpListener::bind(address)
        .await
        .map_err(|source| ModelError::Bind {
            address: address.to_string(),
            source,
        })?;
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, model = %table.info().name, "mock server listening");
    }
    axum::serve(listener, router(table, options))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ModelError::Transport(e.to_string()))
}

/// A mock server running on its own thread. Dropping the handle shuts the
/// server down.
pub struct MockServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for MockServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds synchronously (so bind errors surface here) and serves on a
/// background thread.
pub fn spawn_mock_server(
    table: Arc<MockTable>,
    address: &str,
    options: ServerOptions,
) -> Result<MockServerHandle, ModelError> {
    let bind_err = |source| ModelError::Bind {
        address: address.to_string(),
        source,
    };
    let std_listener = std::net::TcpListener::bind(address).map_err(bind_err)?;
    std_listener.set_nonblocking(true).map_err(bind_err)?;
    let addr = std_listener.local_addr().map_err(bind_err)?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("mock-server".into())
        .spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let listener =
                    tokio::net::TcpListener::from_std(std_listener).expect("tokio listener");
                let _ = axum::serve(listener, router(table, options))
                    .with_graceful_shutdown(async move {
                        let _ = rx.await;
                    })
                    .await;
            });
        })
        .map_err(|e| ModelError::Transport(e.to_string()))?;
    Ok(MockServerHandle {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}
