//! Batch reward-scoring HTTP service for trainer integration.
//!
//! One rollout group per request: groups are the natural unit of within-set
//! centering, and per-group requests keep failure isolation simple. Trainers
//! pipeline requests for throughput; the shared gateway semaphore bounds
//! in-flight judge calls regardless of request concurrency.

use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::sync::Mutex;

use groupward::jsonl::RolloutGroupWire;
use groupward::judge::JudgeGateway;
use groupward::pipeline::{score_group_with_judge, GroupFlag, JudgeFailureKind, PipelineConfig};
use groupward::reward::{RewardBreakdown, TierRanking};
use groupward::rollout::RolloutGroup;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const JUDGE_PROBE_TTL: Duration = Duration::from_secs(30);

pub struct AppState {
    pub pipeline: PipelineConfig,
    pub gateway: Arc<JudgeGateway>,
    pub config_digest: String,
    pub request_size_limit: usize,
    probe_cache: Mutex<Option<(Instant, bool)>>,
    probe_client: reqwest::Client,
}

impl AppState {
    pub fn new(
        pipeline: PipelineConfig,
        gateway: Arc<JudgeGateway>,
        config_digest: String,
        request_size_limit: usize,
    ) -> Self {
        AppState {
            pipeline,
            gateway,
            config_digest,
            request_size_limit,
            probe_cache: Mutex::new(None),
            probe_client: reqwest::Client::builder()
                .timeout(Duration::from_secs(2))
                .build()
                .expect("probe client"),
        }
    }

    /// Judge reachability, cached for [`JUDGE_PROBE_TTL`]. Any HTTP response
    /// counts as reachable; only connection-level failures do not.
    async fn judge_reachable(&self) -> bool {
        let mut cache = self.probe_cache.lock().await;
        if let Some((at, value)) = *cache {
            if at.elapsed() < JUDGE_PROBE_TTL {
                return value;
            }
        }
        let url = &self.gateway.config().base_url;
        let reachable = self.probe_client.get(url).send().await.is_ok();
        *cache = Some((Instant::now(), reachable));
        reachable
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.request_size_limit;
    Router::new()
        .route("/v1/score-group", post(score_group_handler))
        .route("/v1/health", get(health_handler))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

#[derive(Debug, Serialize)]
pub struct ScoreGroupResponse {
    pub prompt_id: String,
    pub rewards: Vec<RewardBreakdown>,
    pub ranking: Option<TierRanking>,
    pub transcripts: Vec<usize>,
    pub flags: Vec<GroupFlag>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    group: Option<ScoreGroupResponse>,
}

async fn score_group_handler(State(state): State<Arc<AppState>>, body: String) -> Response {
    // deserialize with the failing field path in the error
    let mut deserializer = serde_json::Deserializer::from_str(&body);
    let wire: RolloutGroupWire = match serde_path_to_error::deserialize(&mut deserializer) {
        Ok(wire) => wire,
        Err(e) => {
            let body = ErrorBody {
                error: e.inner().to_string(),
                path: Some(e.path().to_string()),
                group: None,
            };
            return (StatusCode::BAD_REQUEST, Json(body)).into_response();
        }
    };
    let group: RolloutGroup = match wire.try_into() {
        Ok(group) => group,
        Err(message) => {
            let body = ErrorBody { error: message, path: None, group: None };
            return (StatusCode::BAD_REQUEST, Json(body)).into_response();
        }
    };

    match score_group_with_judge(&group, &state.gateway, &state.pipeline).await {
        Ok(scored) => {
            let response = ScoreGroupResponse {
                prompt_id: scored.prompt_id.clone(),
                rewards: scored.breakdowns.clone(),
                ranking: scored.ranking.clone(),
                transcripts: scored.transcript_ids.clone(),
                flags: scored.flags.clone(),
            };
            match scored.judge_failure() {
                None => (StatusCode::OK, Json(response)).into_response(),
                // judge endpoint unusable: the breakdown (with zeroed or
                // fallback auxiliary rewards) rides along for the caller
                Some(JudgeFailureKind::Transport) | Some(JudgeFailureKind::Timeout) => (
                    StatusCode::BAD_GATEWAY,
                    Json(ErrorBody {
                        error: "judge transport exhausted".to_string(),
                        path: None,
                        group: Some(response),
                    }),
                )
                    .into_response(),
                Some(JudgeFailureKind::Parse) => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    Json(ErrorBody {
                        error: "judge output unparsable after retries".to_string(),
                        path: None,
                        group: Some(response),
                    }),
                )
                    .into_response(),
            }
        }
        Err(e) => {
            let body =
                ErrorBody { error: e.to_string(), path: None, group: None };
            (StatusCode::UNPROCESSABLE_ENTITY, Json(body)).into_response()
        }
    }
}

#[derive(Debug, Serialize)]
struct HealthBody {
    status: &'static str,
    version: &'static str,
    config_digest: String,
    judge_reachable: bool,
    degraded: bool,
}

async fn health_handler(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    let reachable = state.judge_reachable().await;
    Json(HealthBody {
        status: "ok",
        version: VERSION,
        config_digest: state.config_digest.clone(),
        judge_reachable: reachable,
        degraded: !reachable,
    })
}

/// Binds the listener and serves until shutdown. Returns the bound address
/// (useful with port 0).
pub async fn serve(
    state: Arc<AppState>,
    listen: &str,
) -> anyhow::Result<(std::net::SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    let addr = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!("service stopped: {e}");
        }
    });
    Ok((addr, handle))
}
