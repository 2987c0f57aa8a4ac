//! Scripted mock judge server speaking the chat-completions wire format.
//! Drives deterministic end-to-end tests without a model.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use groupward::judge::mock::JudgeScript;
use groupward::judge::{ChatMessage, ChatRequest};

pub fn load_script(path: &Path) -> Result<JudgeScript> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading judge script {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing judge script {}", path.display()))
}

#[derive(Debug, Deserialize)]
struct IncomingRequest {
    #[serde(default)]
    model: String,
    messages: Vec<ChatMessage>,
    #[serde(default)]
    temperature: f64,
}

async fn completions(
    State(script): State<Arc<JudgeScript>>,
    Json(incoming): Json<IncomingRequest>,
) -> impl IntoResponse {
    let request = ChatRequest {
        model: incoming.model,
        messages: incoming.messages,
        temperature: incoming.temperature,
    };
    match script.resolve(&request) {
        Some(reply) => (
            StatusCode::OK,
            Json(json!({
                "object": "chat.completion",
                "model": request.model,
                "choices": [{
                    "index": 0,
                    "message": {"role": "assistant", "content": reply},
                    "finish_reason": "stop",
                }],
            })),
        ),
        None => (
            StatusCode::NOT_FOUND,
            Json(json!({"error": "no scripted reply matches this request"})),
        ),
    }
}

async fn health() -> impl IntoResponse {
    Json(json!({"status": "ok"}))
}

pub fn router(script: Arc<JudgeScript>) -> Router {
    Router::new()
        .route("/chat/completions", post(completions))
        .route("/health", get(health))
        .with_state(script)
}

/// Binds and serves the mock judge; returns the bound address.
pub async fn serve(
    script: JudgeScript,
    listen: &str,
) -> Result<(std::net::SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let app = router(Arc::new(script));
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("mock judge stopped: {e}");
        }
    });
    Ok((addr, handle))
}
