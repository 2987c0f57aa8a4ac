//! Rollout and prompt-group data model.
//!
//! A rollout is one sampled model response for a prompt. Responses carry a
//! reasoning trajectory inside `<think>...</think>` and a final answer in the
//! last `\boxed{...}` expression; [`split_response`] decomposes raw text into
//! those parts, degrading gracefully when either marker is missing.
//!
//! All types here are immutable after construction and safe to share across
//! workers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const BOXED_OPEN: &str = "\\boxed{";

/// One training prompt with its reference answer.
///
/// `image_ref` is an opaque handle carried for provenance only; it is never
/// transmitted to judges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub reference_answer: String,
    /// Multiple-choice options as ordered `(letter, content)` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<(String, String)>>,
}

impl PromptRecord {
    /// Checks the record-level invariants: nonempty ids and reference answer,
    /// unique option letters.
    pub fn validate(&self) -> Result<(), RolloutError> {
        if self.prompt_id.trim().is_empty() {
            return Err(RolloutError::EmptyPromptId);
        }
        if self.reference_answer.trim().is_empty() {
            return Err(RolloutError::EmptyReference {
                prompt_id: self.prompt_id.clone(),
            });
        }
        if let Some(options) = &self.options {
            let mut seen = std::collections::HashSet::new();
            for (letter, _) in options {
                if !seen.insert(letter.as_str()) {
                    return Err(RolloutError::DuplicateOptionLetter {
                        prompt_id: self.prompt_id.clone(),
                        letter: letter.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Which fallback produced the trajectory during [`split_response`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    /// Inner content of the first well-formed `<think>` block.
    ThinkBlock,
    /// No think block; everything before the last boxed expression.
    BeforeBoxed,
    /// Neither marker found; the whole response.
    FullText,
}

/// Decomposition of one raw response.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResponse {
    pub trajectory: String,
    pub boxed_answer: Option<String>,
    pub source: TrajectorySource,
}

/// One sampled response within a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    /// 1-based index within the group.
    pub rollout_id: u32,
    pub raw_text: String,
    pub trajectory: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxed_answer: Option<String>,
    pub trajectory_source: TrajectorySource,
    /// Filled by the verifier stage; `None` until then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier_pass: Option<bool>,
}

impl Rollout {
    /// Builds a rollout by splitting `raw_text`.
    pub fn from_raw(rollout_id: u32, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let split = split_response(&raw_text);
        Rollout {
            rollout_id,
            raw_text,
            trajectory: split.trajectory,
            boxed_answer: split.boxed_answer,
            trajectory_source: split.source,
            verifier_pass: None,
        }
    }

    /// Returns a copy with the verifier outcome recorded.
    pub fn with_verifier_pass(mut self, pass: bool) -> Self {
        self.verifier_pass = Some(pass);
        self
    }
}

/// One prompt with its `N` sampled rollouts; the unit of reward assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub prompt: PromptRecord,
    pub rollouts: Vec<Rollout>,
}

impl RolloutGroup {
    pub fn new(prompt: PromptRecord, rollouts: Vec<Rollout>) -> Result<Self, RolloutError> {
        prompt.validate()?;
        if rollouts.is_empty() {
            return Err(RolloutError::EmptyGroup {
                prompt_id: prompt.prompt_id.clone(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for r in &rollouts {
            if !seen.insert(r.rollout_id) {
                return Err(RolloutError::DuplicateRolloutId {
                    prompt_id: prompt.prompt_id.clone(),
                    rollout_id: r.rollout_id,
                });
            }
        }
        Ok(RolloutGroup { prompt, rollouts })
    }

    pub fn len(&self) -> usize {
        self.rollouts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rollouts.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RolloutError {
    #[error("prompt_id is empty")]
    EmptyPromptId,
    #[error("reference_answer is empty for prompt {prompt_id}")]
    EmptyReference { prompt_id: String },
    #[error("duplicate option letter {letter:?} for prompt {prompt_id}")]
    DuplicateOptionLetter { prompt_id: String, letter: String },
    #[error("group for prompt {prompt_id} has no rollouts")]
    EmptyGroup { prompt_id: String },
    #[error("duplicate rollout_id {rollout_id} in group for prompt {prompt_id}")]
    DuplicateRolloutId { prompt_id: String, rollout_id: u32 },
}

/// Splits a raw response into trajectory and boxed answer.
///
/// The trajectory is the inner content of the first well-formed think block
/// when one exists, otherwise all text preceding the last balanced boxed
/// expression, otherwise the whole text. The boxed answer is the inner
/// content of the last balanced `\boxed{...}` span anywhere in the text.
/// Marker absence is not an error; [`SplitResponse::source`] records which
/// fallback fired.
pub fn split_response(raw_text: &str) -> SplitResponse {
    let boxed = last_balanced_boxed(raw_text);

    if let Some(open) = raw_text.find(THINK_OPEN) {
        let body_start = open + THINK_OPEN.len();
        if let Some(close_rel) = raw_text[body_start..].find(THINK_CLOSE) {
            return SplitResponse {
                trajectory: raw_text[body_start..body_start + close_rel].to_string(),
                boxed_answer: boxed.map(|(_, inner)| inner.to_string()),
                source: TrajectorySource::ThinkBlock,
            };
        }
    }

    match boxed {
        Some((open_at, inner)) => SplitResponse {
            trajectory: raw_text[..open_at].to_string(),
            boxed_answer: Some(inner.to_string()),
            source: TrajectorySource::BeforeBoxed,
        },
        None => SplitResponse {
            trajectory: raw_text.to_string(),
            boxed_answer: None,
            source: TrajectorySource::FullText,
        },
    }
}

/// Finds the last `\boxed{...}` with balanced braces. Returns the byte offset
/// of the `\boxed{` token and the inner content.
fn last_balanced_boxed(text: &str) -> Option<(usize, &str)> {
    let mut found = None;
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find(BOXED_OPEN) {
        let open_at = search_from + rel;
        let inner_start = open_at + BOXED_OPEN.len();
        if let Some(inner_end) = balanced_span_end(text, inner_start) {
            found = Some((open_at, &text[inner_start..inner_end]));
        }
        search_from = open_at + BOXED_OPEN.len();
    }
    found
}

/// Walks from `start` (just after an opening brace) to the matching close,
/// tracking nesting and skipping backslash-escaped braces. Returns the byte
/// index of the closing brace, or `None` if unbalanced.
fn balanced_span_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 1usize;
    let mut i = start;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 1, // skip escaped char
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}
