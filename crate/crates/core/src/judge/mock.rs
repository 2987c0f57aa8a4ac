//! Deterministic judge transports for tests and offline runs.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{ChatRequest, JudgeTransport, RequestKind, TransportError};

/// Scripted reply table: request kind plus a substring fingerprint of the
/// rendered prompt select the canned reply.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JudgeScript {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    /// Per-kind replies used when no rule matches.
    #[serde(default)]
    pub fallback: ScriptFallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptRule {
    /// Restrict the rule to one prompt family; `None` matches any.
    #[serde(default)]
    pub kind: Option<RequestKind>,
    /// Substring the concatenated message contents must contain.
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScriptFallback {
    #[serde(default)]
    pub pointwise: Option<String>,
    #[serde(default)]
    pub groupwise: Option<String>,
    #[serde(default)]
    pub prm_step: Option<String>,
    #[serde(default)]
    pub consistency: Option<String>,
}

impl JudgeScript {
    /// Resolves the reply for one request, or `None` when nothing matches.
    pub fn resolve(&self, request: &ChatRequest) -> Option<String> {
        let kind = RequestKind::detect(&request.messages);
        let haystack: String = request
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        for rule in &self.rules {
            let kind_ok = rule.kind.is_none() || rule.kind == kind;
            if kind_ok && haystack.contains(&rule.contains) {
                return Some(rule.reply.clone());
            }
        }
        match kind {
            Some(RequestKind::Pointwise) => self.fallback.pointwise.clone(),
            Some(RequestKind::Groupwise) => self.fallback.groupwise.clone(),
            Some(RequestKind::PrmStep) => self.fallback.prm_step.clone(),
            Some(RequestKind::Consistency) => self.fallback.consistency.clone(),
            None => None,
        }
    }
}

/// In-process transport answering from a [`JudgeScript`].
pub struct ScriptedTransport {
    script: JudgeScript,
}

impl ScriptedTransport {
    pub fn new(script: JudgeScript) -> Self {
        ScriptedTransport { script }
    }
}

#[async_trait]
impl JudgeTransport for ScriptedTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.script
            .resolve(request)
            .ok_or_else(|| TransportError::Network("no scripted reply matches".to_string()))
    }
}

/// Replies (or fails) in a fixed sequence; for retry-path tests.
pub struct SequenceTransport {
    replies: Mutex<VecDeque<Result<String, TransportError>>>,
}

impl SequenceTransport {
    pub fn new(replies: Vec<Result<String, TransportError>>) -> Self {
        SequenceTransport { replies: Mutex::new(replies.into()) }
    }
}

#[async_trait]
impl JudgeTransport for SequenceTransport {
    async fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        self.replies
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| Err(TransportError::Network("sequence exhausted".to_string())))
    }
}

/// Wraps a transport and tracks call and in-flight counts; an optional delay
/// keeps requests overlapping so concurrency bounds become observable.
pub struct InstrumentedTransport<T> {
    inner: T,
    delay: Duration,
    calls: AtomicU64,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl<T> InstrumentedTransport<T> {
    pub fn new(inner: T) -> Self {
        Self::with_delay(inner, Duration::ZERO)
    }

    pub fn with_delay(inner: T, delay: Duration) -> Self {
        InstrumentedTransport {
            inner,
            delay,
            calls: AtomicU64::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }
}

#[async_trait]
impl<T: JudgeTransport> JudgeTransport for InstrumentedTransport<T> {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        if !self.delay.is_zero() {
            tokio::time::sleep(self.delay).await;
        }
        let result = self.inner.complete(request).await;
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}

/// Convenience: a script that answers every request of every kind with
/// fixed well-formed replies, tying all groupwise candidates.
pub fn uniform_script(k_hint: usize) -> JudgeScript {
    let tie: Vec<Vec<usize>> = vec![(1..=k_hint).collect()];
    JudgeScript {
        rules: Vec::new(),
        fallback: ScriptFallback {
            pointwise: Some(r#"{"reasoning_feedback":"ok","judge_score":0.5}"#.to_string()),
            groupwise: Some(super::parse::format_groupwise_reply(&tie)),
            prm_step: Some("+".to_string()),
            consistency: Some(r#"{"verdict":"consistent"}"#.to_string()),
        },
    }
}

/// Shorthand for an `Arc`ed scripted transport.
pub fn scripted(script: JudgeScript) -> Arc<dyn JudgeTransport> {
    Arc::new(ScriptedTransport::new(script))
}
