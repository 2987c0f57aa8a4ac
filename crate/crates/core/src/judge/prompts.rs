//! Prompt rendering for the four judge families.
//!
//! Templates are versioned fixtures compiled into the binary; rendering is a
//! pure function, so identical inputs yield byte-identical prompts. Slot
//! substitution is single-pass: slot markers appearing inside filled values
//! are emitted verbatim, never re-substituted.

use thiserror::Error;

use super::{ChatMessage, Role};

pub const POINTWISE_TEMPLATE: &str = include_str!("../../templates/pointwise.txt");
pub const GROUPWISE_TEMPLATE: &str = include_str!("../../templates/groupwise.txt");
pub const PRM_SYSTEM_TEMPLATE: &str = include_str!("../../templates/prm_system.txt");
pub const PRM_USER_TEMPLATE: &str = include_str!("../../templates/prm_user.txt");
pub const CONSISTENCY_TEMPLATE: &str = include_str!("../../templates/consistency.txt");

/// Assistant reply replayed for already-accepted steps in the step-score
/// conversation.
pub const PRM_POSITIVE_REPLY: &str = "+";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("groupwise ranking needs at least 2 candidates, got {count}")]
    TooFewCandidates { count: usize },
}

/// Fills `{name}` markers in one left-to-right pass. Values are appended
/// without rescanning, so a value containing a marker stays verbatim.
fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let markers: Vec<(String, &str)> =
        slots.iter().map(|(name, value)| (format!("{{{name}}}"), *value)).collect();
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    loop {
        let mut earliest: Option<(usize, usize, &str)> = None;
        for (marker, value) in &markers {
            if let Some(pos) = rest.find(marker.as_str()) {
                if earliest.map_or(true, |(p, _, _)| pos < p) {
                    earliest = Some((pos, marker.len(), value));
                }
            }
        }
        match earliest {
            Some((pos, len, value)) => {
                out.push_str(&rest[..pos]);
                out.push_str(value);
                rest = &rest[pos + len..];
            }
            None => {
                out.push_str(rest);
                return out;
            }
        }
    }
}

/// Joins a trajectory and optional boxed answer into the judge-facing
/// response text.
pub fn compose_response(trajectory: &str, boxed_answer: Option<&str>) -> String {
    match (trajectory.is_empty(), boxed_answer) {
        (false, Some(a)) => format!("{trajectory}\n\nFinal answer: \\boxed{{{a}}}"),
        (true, Some(a)) => format!("Final answer: \\boxed{{{a}}}"),
        (_, None) => trajectory.to_string(),
    }
}

/// Renders the pointwise scoring prompt for one rollout.
pub fn render_pointwise_prompt(
    question: &str,
    trajectory: &str,
    boxed_answer: Option<&str>,
) -> String {
    let response = compose_response(trajectory, boxed_answer);
    fill(POINTWISE_TEMPLATE, &[("problem", question), ("response", &response)])
}

/// A rendered groupwise prompt plus the map from presentation index to
/// rollout id (`order[i]` is the rollout shown as candidate `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupwisePrompt {
    pub text: String,
    pub order: Vec<u32>,
}

/// Renders the tie-aware ranking prompt over all candidates, numbering them
/// 1..K in presentation order. Duplicate candidate texts are kept; the judge
/// may tie them.
pub fn render_groupwise_prompt(
    question: &str,
    reference_answer: &str,
    candidates: &[(u32, String)],
) -> Result<GroupwisePrompt, PromptError> {
    if candidates.len() < 2 {
        return Err(PromptError::TooFewCandidates { count: candidates.len() });
    }
    let mut listing = String::new();
    let mut order = Vec::with_capacity(candidates.len());
    for (i, (rollout_id, text)) in candidates.iter().enumerate() {
        if i > 0 {
            listing.push_str("\n\n");
        }
        listing.push_str(&format!("### Candidate {}\n{}", i + 1, text));
        order.push(*rollout_id);
    }
    let text = fill(
        GROUPWISE_TEMPLATE,
        &[
            ("problem", question),
            ("reference_answer", reference_answer),
            ("candidate_solutions", &listing),
        ],
    );
    Ok(GroupwisePrompt { text, order })
}

/// Renders the step-score conversation for the last step in `steps`:
/// the system instruction, steps before it replayed as user turns each
/// answered positively, then the queried step as the final user turn.
pub fn render_prm_turns(question: &str, steps: &[String]) -> Vec<ChatMessage> {
    let mut messages = Vec::with_capacity(steps.len() * 2 + 1);
    messages.push(ChatMessage {
        role: Role::System,
        content: PRM_SYSTEM_TEMPLATE.trim_end().to_string(),
    });
    for (i, step) in steps.iter().enumerate() {
        messages.push(ChatMessage::user(fill(
            PRM_USER_TEMPLATE,
            &[("question", question), ("step", step)],
        )));
        if i + 1 < steps.len() {
            messages.push(ChatMessage::assistant(PRM_POSITIVE_REPLY));
        }
    }
    messages
}

/// Renders the reasoning-answer consistency audit prompt.
pub fn render_consistency_prompt(
    question: &str,
    options: Option<&[(String, String)]>,
    trajectory: &str,
    boxed_answer: &str,
) -> String {
    let options_text = match options {
        Some(options) if !options.is_empty() => options
            .iter()
            .map(|(letter, content)| format!("{letter}. {content}"))
            .collect::<Vec<_>>()
            .join("\n"),
        _ => "(none)".to_string(),
    };
    fill(
        CONSISTENCY_TEMPLATE,
        &[
            ("question", question),
            ("options", &options_text),
            ("trajectory", trajectory),
            ("boxed_answer", boxed_answer),
        ],
    )
}

/// Cuts a trajectory into steps on blank-line boundaries, optionally also
/// starting a new step at ordinal markers like "1.", "2)", or "Step 3:".
pub fn split_steps(trajectory: &str, split: crate::reward::StepSplit) -> Vec<String> {
    use crate::reward::StepSplit;
    let mut steps: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut blank_run = false;
    for line in trajectory.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            blank_run = true;
            continue;
        }
        let ordinal = matches!(split, StepSplit::BlankLineOrOrdinal) && starts_with_ordinal(trimmed);
        if (blank_run || ordinal) && !current.is_empty() {
            steps.push(std::mem::take(&mut current));
        }
        blank_run = false;
        if !current.is_empty() {
            current.push('\n');
        }
        current.push_str(line);
    }
    if !current.is_empty() {
        steps.push(current);
    }
    steps
}

/// "1."/"2)"/"(3)"/"Step 4:" style step openers.
fn starts_with_ordinal(line: &str) -> bool {
    let line = line.strip_prefix('(').unwrap_or(line);
    if let Some(rest) = line
        .strip_prefix("Step ")
        .or_else(|| line.strip_prefix("step "))
        .or_else(|| line.strip_prefix("STEP "))
    {
        return rest.chars().next().is_some_and(|c| c.is_ascii_digit());
    }
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return false;
    }
    matches!(line[digits.len()..].chars().next(), Some('.') | Some(')') | Some(':'))
}
