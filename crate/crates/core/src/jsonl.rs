//! Line-delimited JSON exchange formats.
//!
//! Three wire schemas: rollout groups in (one group per line), reward
//! breakdowns out (one group per line), and prediction records for the
//! consistency auditor. Readers collect malformed lines with their line
//! numbers instead of silently dropping them; writers reject non-finite
//! values so every written batch round-trips bit-exactly.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::RewardBreakdown;
use crate::rollout::{PromptRecord, Rollout, RolloutGroup};

/// One malformed input line, kept for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parse result carrying both the good records and the collected failures.
#[derive(Debug)]
pub struct ReadOutcome<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

impl<T> ReadOutcome<T> {
    /// Fails unless every line parsed.
    pub fn require_clean(self) -> Result<Vec<T>, JsonlError> {
        if self.errors.is_empty() {
            Ok(self.records)
        } else {
            Err(JsonlError::MalformedLines { errors: self.errors })
        }
    }
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{} malformed line(s), first: {}", errors.len(), errors[0])]
    MalformedLines { errors: Vec<LineError> },
    #[error("non-finite {field} for prompt {prompt_id}, rollout {rollout_id}")]
    NonFiniteValue { prompt_id: String, rollout_id: u32, field: &'static str },
}

/// Wire form of one rollout group line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutGroupWire {
    pub prompt_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub reference_answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<(String, String)>>,
    pub rollouts: Vec<RolloutWire>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutWire {
    pub rollout_id: u32,
    pub raw_text: String,
}

impl TryFrom<RolloutGroupWire> for RolloutGroup {
    type Error = String;
    fn try_from(wire: RolloutGroupWire) -> Result<Self, Self::Error> {
        build_group(wire)
    }
}

/// Reward output for one group, one line in the reward stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRewards {
    pub prompt_id: String,
    pub rewards: Vec<RewardBreakdown>,
}

/// One model prediction for the consistency auditor. `dataset` and `step`
/// are optional grouping tags for per-dataset metrics and training curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub prompt_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<(String, String)>>,
    pub reference_answer: String,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<u64>,
}

fn read_lines<T, R, F>(reader: R, mut validate: F) -> Result<ReadOutcome<T>, JsonlError>
where
    T: DeserializeOwned,
    R: BufRead,
    F: FnMut(&T, usize) -> Result<(), String>,
{
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        match serde_json::from_str::<T>(&line) {
            Ok(record) => match validate(&record, lineno) {
                Ok(()) => records.push(record),
                Err(message) => errors.push(LineError { line: lineno, message }),
            },
            Err(e) => errors.push(LineError { line: lineno, message: e.to_string() }),
        }
    }
    Ok(ReadOutcome { records, errors })
}

/// Reads rollout groups, splitting every raw response into trajectory and
/// boxed answer. Groups come back in input order; duplicate prompt ids and
/// invariant violations are collected per line.
pub fn read_rollout_groups<R: BufRead>(reader: R) -> Result<ReadOutcome<RolloutGroup>, JsonlError> {
    let mut seen_prompts: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let parsed = match serde_json::from_str::<RolloutGroupWire>(&line) {
            Ok(parsed) => parsed,
            Err(e) => {
                errors.push(LineError { line: lineno, message: e.to_string() });
                continue;
            }
        };
        if !seen_prompts.insert(parsed.prompt_id.clone()) {
            errors.push(LineError {
                line: lineno,
                message: format!("duplicate prompt_id {:?}", parsed.prompt_id),
            });
            continue;
        }
        match build_group(parsed) {
            Ok(group) => records.push(group),
            Err(message) => errors.push(LineError { line: lineno, message }),
        }
    }
    Ok(ReadOutcome { records, errors })
}

fn build_group(line: RolloutGroupWire) -> Result<RolloutGroup, String> {
    let prompt = PromptRecord {
        prompt_id: line.prompt_id,
        question: line.question,
        image_ref: line.image_ref,
        reference_answer: line.reference_answer,
        options: line.options,
    };
    let rollouts = line
        .rollouts
        .into_iter()
        .map(|r| Rollout::from_raw(r.rollout_id, r.raw_text))
        .collect();
    RolloutGroup::new(prompt, rollouts).map_err(|e| e.to_string())
}

/// Serializes one group back to its wire line (no trailing newline).
pub fn group_to_line(group: &RolloutGroup) -> String {
    let line = RolloutGroupWire {
        prompt_id: group.prompt.prompt_id.clone(),
        question: group.prompt.question.clone(),
        image_ref: group.prompt.image_ref.clone(),
        reference_answer: group.prompt.reference_answer.clone(),
        options: group.prompt.options.clone(),
        rollouts: group
            .rollouts
            .iter()
            .map(|r| RolloutWire { rollout_id: r.rollout_id, raw_text: r.raw_text.clone() })
            .collect(),
    };
    serde_json::to_string(&line).expect("group serialization cannot fail")
}

/// Writes one reward line per group, preserving order. Any non-finite
/// reward value rejects the whole write.
pub fn write_group_rewards<W: Write>(
    groups: &[GroupRewards],
    mut writer: W,
) -> Result<(), JsonlError> {
    for group in groups {
        for b in &group.rewards {
            for (field, value) in
                [("r_aux", b.r_aux), ("r_total", b.r_total), ("advantage", b.advantage)]
            {
                if !value.is_finite() {
                    return Err(JsonlError::NonFiniteValue {
                        prompt_id: group.prompt_id.clone(),
                        rollout_id: b.rollout_id,
                        field,
                    });
                }
            }
        }
        serde_json::to_writer(&mut writer, group)
            .map_err(|e| JsonlError::Io(std::io::Error::other(e)))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_group_rewards<R: BufRead>(reader: R) -> Result<ReadOutcome<GroupRewards>, JsonlError> {
    read_lines(reader, |_, _| Ok(()))
}

pub fn read_prediction_records<R: BufRead>(
    reader: R,
) -> Result<ReadOutcome<PredictionRecord>, JsonlError> {
    read_lines(reader, |record: &PredictionRecord, _| {
        if record.prompt_id.trim().is_empty() {
            return Err("prompt_id is empty".to_string());
        }
        if record.reference_answer.trim().is_empty() {
            return Err(format!("reference_answer is empty for prompt {:?}", record.prompt_id));
        }
        Ok(())
    })
}
