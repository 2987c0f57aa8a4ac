//! Judge gateway: prompt rendering, transport, retry, and verdict parsing.
//!
//! The gateway is the single shared component through which every judge
//! interaction flows. It renders one of the four prompt families, submits the
//! chat-completion request through a [`JudgeTransport`] (HTTP endpoint, mock,
//! or synthetic model), bounds process-wide concurrency with a semaphore,
//! retries transport and parse failures with jittered backoff, and leaves
//! exactly one [`JudgeTranscript`] per interaction.

pub mod mock;
pub mod parse;
pub mod prompts;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::ConsistencyVerdict;
use crate::reward::TierRanking;
use parse::{ParseError, PointwiseVerdict};

/// The four judge prompt families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Pointwise,
    Groupwise,
    PrmStep,
    Consistency,
}

impl RequestKind {
    /// Infers the prompt family from rendered messages via each template's
    /// distinctive opening line. Used by mock servers to route replies.
    pub fn detect(messages: &[ChatMessage]) -> Option<RequestKind> {
        for m in messages {
            if m.content.contains("You are a process reward model") {
                return Some(RequestKind::PrmStep);
            }
            if m.content.contains("You are an expert evaluator for reasoning quality") {
                return Some(RequestKind::Pointwise);
            }
            if m.content.contains("You are ranking multiple candidate solutions") {
                return Some(RequestKind::Groupwise);
            }
            if m.content.contains("auditing whether a reasoning trajectory is consistent") {
                return Some(RequestKind::Consistency);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// One chat-completion request as handed to a transport.
#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Sampling temperature for judge calls; 0 for deterministic scoring.
    pub temperature: f64,
    /// Process-wide bound on in-flight judge requests.
    pub max_concurrent_requests: usize,
    /// Extra attempts after the first failed one.
    pub retry_budget: u32,
    pub timeout_ms: u64,
    /// Base for jittered exponential backoff between attempts.
    pub retry_backoff_ms: u64,
}

impl Default for JudgeEndpointConfig {
    fn default() -> Self {
        JudgeEndpointConfig {
            base_url: "http://127.0.0.1:8000".to_string(),
            model_name: "judge".to_string(),
            temperature: 0.0,
            max_concurrent_requests: 8,
            retry_budget: 2,
            timeout_ms: 30_000,
            retry_backoff_ms: 200,
        }
    }
}

impl JudgeEndpointConfig {
    pub fn validate(&self) -> Result<(), JudgeError> {
        if self.max_concurrent_requests < 1 {
            return Err(JudgeError::InvalidConcurrency {
                value: self.max_concurrent_requests,
            });
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(JudgeError::InvalidTemperature { value: self.temperature });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("endpoint returned status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
}

/// Anything that can answer a chat-completion request.
#[async_trait]
pub trait JudgeTransport: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Parsed judge output, stored on the transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParsedVerdict {
    Score { score: f64, clamped: bool, feedback: Option<String> },
    Ranking { tiers: TierRanking },
    StepToken { pass: bool },
    Consistency { verdict: ConsistencyVerdict },
}

/// Audit trail for one judge interaction (including failed ones).
#[derive(Debug, Clone, Serialize)]
pub struct JudgeTranscript {
    pub request_kind: RequestKind,
    pub rendered_prompt: String,
    /// Assistant text of the last attempt; empty when nothing came back.
    pub raw_response: String,
    /// Present iff the final attempt succeeded.
    pub parsed: Option<ParsedVerdict>,
    pub attempts: u32,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("max_concurrent_requests must be >= 1, got {value}")]
    InvalidConcurrency { value: usize },
    #[error("temperature must be finite and >= 0, got {value}")]
    InvalidTemperature { value: f64 },
}

/// Terminal failure of a judge interaction after all attempts.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("judge timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("judge transport failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("judge output unparsable after {attempts} attempt(s): {message}")]
    Parse { attempts: u32, message: String },
}

impl GatewayError {
    pub fn attempts(&self) -> u32 {
        match self {
            GatewayError::Timeout { attempts }
            | GatewayError::Transport { attempts, .. }
            | GatewayError::Parse { attempts, .. } => *attempts,
        }
    }
}

enum AttemptFailure {
    Timeout,
    Transport(String),
    Empty,
    Parse(ParseError),
}

/// Shared judge front end with retries, backoff, bounded concurrency, and an
/// append-only transcript log.
pub struct JudgeGateway {
    transport: Arc<dyn JudgeTransport>,
    config: JudgeEndpointConfig,
    limiter: Arc<tokio::sync::Semaphore>,
    transcripts: Mutex<Vec<JudgeTranscript>>,
    calls: AtomicU64,
}

impl JudgeGateway {
    pub fn new(
        config: JudgeEndpointConfig,
        transport: Arc<dyn JudgeTransport>,
    ) -> Result<Self, JudgeError> {
        config.validate()?;
        let limiter = Arc::new(tokio::sync::Semaphore::new(config.max_concurrent_requests));
        Ok(JudgeGateway {
            transport,
            config,
            limiter,
            transcripts: Mutex::new(Vec::new()),
            calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &JudgeEndpointConfig {
        &self.config
    }

    /// Total transport calls issued (attempts, not interactions).
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn transcript_count(&self) -> usize {
        self.transcripts.lock().unwrap().len()
    }

    pub fn transcripts(&self) -> Vec<JudgeTranscript> {
        self.transcripts.lock().unwrap().clone()
    }

    /// Raw completion text of one interaction, with retries on transport
    /// failure or empty response.
    pub async fn call_judge(
        &self,
        kind: RequestKind,
        messages: Vec<ChatMessage>,
    ) -> Result<(String, usize), GatewayError> {
        self.run(kind, messages, |raw| {
            Ok((raw.to_string(), None))
        })
        .await
    }

    pub async fn pointwise(
        &self,
        messages: Vec<ChatMessage>,
    ) -> Result<(PointwiseVerdict, usize), GatewayError> {
        self.run(RequestKind::Pointwise, messages, |raw| {
            let v = parse::parse_pointwise_score(raw)?;
            let parsed = ParsedVerdict::Score {
                score: v.score,
                clamped: v.clamped,
                feedback: v.feedback.clone(),
            };
            Ok((v, Some(parsed)))
        })
        .await
    }

    pub async fn groupwise(
        &self,
        messages: Vec<ChatMessage>,
        candidate_count: usize,
        index_map: &[u32],
    ) -> Result<(TierRanking, usize), GatewayError> {
        self.run(RequestKind::Groupwise, messages, move |raw| {
            let ranking = parse::parse_groupwise_ranking(raw, candidate_count, index_map)?;
            let parsed = ParsedVerdict::Ranking { tiers: ranking.clone() };
            Ok((ranking, Some(parsed)))
        })
        .await
    }

    pub async fn prm_step(
        &self,
        messages: Vec<ChatMessage>,
    ) -> Result<(bool, usize), GatewayError> {
        self.run(RequestKind::PrmStep, messages, |raw| {
            let pass = parse::parse_prm_token(raw)?;
            Ok((pass, Some(ParsedVerdict::StepToken { pass })))
        })
        .await
    }

    pub async fn consistency(
        &self,
        messages: Vec<ChatMessage>,
    ) -> Result<(ConsistencyVerdict, usize), GatewayError> {
        self.run(RequestKind::Consistency, messages, |raw| {
            let verdict = parse::parse_consistency_verdict(raw)?;
            Ok((verdict, Some(ParsedVerdict::Consistency { verdict })))
        })
        .await
    }

    async fn run<T>(
        &self,
        kind: RequestKind,
        messages: Vec<ChatMessage>,
        parser: impl Fn(&str) -> Result<(T, Option<ParsedVerdict>), ParseError>,
    ) -> Result<(T, usize), GatewayError> {
        let request = ChatRequest {
            model: self.config.model_name.clone(),
            messages,
            temperature: self.config.temperature,
        };
        let started = Instant::now();
        let timeout = Duration::from_millis(self.config.timeout_ms);
        let mut attempts: u32 = 0;
        let mut last_response = String::new();
        let mut last_failure = AttemptFailure::Empty;

        while attempts <= self.config.retry_budget {
            if attempts > 0 {
                tokio::time::sleep(self.backoff(attempts)).await;
            }
            attempts += 1;
            let outcome = {
                let _permit =
                    self.limiter.acquire().await.expect("gateway semaphore never closes");
                self.calls.fetch_add(1, Ordering::Relaxed);
                tokio::time::timeout(timeout, self.transport.complete(&request)).await
            };
            match outcome {
                Err(_) => last_failure = AttemptFailure::Timeout,
                Ok(Err(TransportError::Timeout)) => last_failure = AttemptFailure::Timeout,
                Ok(Err(e)) => last_failure = AttemptFailure::Transport(e.to_string()),
                Ok(Ok(text)) if text.trim().is_empty() => last_failure = AttemptFailure::Empty,
                Ok(Ok(text)) => {
                    last_response = text;
                    match parser(&last_response) {
                        Ok((value, parsed)) => {
                            let id = self.record(JudgeTranscript {
                                request_kind: kind,
                                rendered_prompt: render_messages(&request.messages),
                                raw_response: last_response,
                                parsed,
                                attempts,
                                latency_ms: started.elapsed().as_millis() as u64,
                            });
                            return Ok((value, id));
                        }
                        Err(e) => last_failure = AttemptFailure::Parse(e),
                    }
                }
            }
        }

        self.record(JudgeTranscript {
            request_kind: kind,
            rendered_prompt: render_messages(&request.messages),
            raw_response: last_response,
            parsed: None,
            attempts,
            latency_ms: started.elapsed().as_millis() as u64,
        });
        Err(match last_failure {
            AttemptFailure::Timeout => GatewayError::Timeout { attempts },
            AttemptFailure::Transport(message) => GatewayError::Transport { attempts, message },
            AttemptFailure::Empty => GatewayError::Transport {
                attempts,
                message: "empty response".to_string(),
            },
            AttemptFailure::Parse(e) => GatewayError::Parse { attempts, message: e.to_string() },
        })
    }

    fn record(&self, transcript: JudgeTranscript) -> usize {
        let mut log = self.transcripts.lock().unwrap();
        log.push(transcript);
        log.len() - 1
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.retry_backoff_ms.max(1);
        let scaled = base.saturating_mul(1u64 << (attempt - 1).min(6));
        let jitter = rand::rng().random_range(0.5..1.5);
        Duration::from_millis((scaled as f64 * jitter) as u64)
    }
}

/// Canonical single-text rendering of a message sequence for transcripts.
pub fn render_messages(messages: &[ChatMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        out.push_str(&format!("[{role}]\n{}\n\n", m.content));
    }
    out
}

/// HTTP transport speaking the common chat-completions wire format.
pub struct HttpJudgeTransport {
    client: reqwest::Client,
    base_url: String,
    api_key: Option<String>,
}

impl HttpJudgeTransport {
    pub fn new(
        base_url: impl Into<String>,
        timeout: Duration,
        api_key: Option<String>,
    ) -> Result<Self, TransportError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpJudgeTransport {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
        })
    }
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

#[async_trait]
impl JudgeTransport for HttpJudgeTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut req = self.client.post(&url).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().await.map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(TransportError::Http { status: status.as_u16(), body });
        }
        let completion: ChatCompletionResponse = response
            .json()
            .await
            .map_err(|e| TransportError::Network(format!("bad completion body: {e}")))?;
        Ok(completion
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .unwrap_or_default())
    }
}
