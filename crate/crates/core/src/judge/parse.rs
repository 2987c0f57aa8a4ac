//! Judge output parsing: rankings, scalar scores, step tokens, and
//! consistency verdicts.
//!
//! Judges are instructed to return strict JSON but real outputs drift, so
//! extraction first tries the whole message, then the first parsable JSON
//! object inside it (tolerating code fences and surrounding prose). Parse
//! failures bubble up so the gateway can retry.

use serde_json::Value;
use thiserror::Error;

use crate::consistency::ConsistencyVerdict;
use crate::reward::TierRanking;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no JSON object in judge output")]
    NoJson,
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("judge_score is not a number")]
    ScoreNotNumeric,
    #[error("candidate index is not an integer in 1..={k}")]
    BadIndex { k: usize },
    #[error("candidate {index} appears more than once")]
    DuplicateIndex { index: usize },
    #[error("candidate {index} missing from the ranking")]
    MissingIndex { index: usize },
    #[error("rank for candidate {index} is not an integer")]
    NonIntegerRank { index: usize },
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("expected a single +/- token, got {0:?}")]
    BadToken(String),
    #[error("unknown verdict {0:?}")]
    BadVerdict(String),
}

/// First parsable JSON object in `raw`: the whole trimmed message when it is
/// one, otherwise scanning forward across fences and prose.
pub fn extract_first_json(raw: &str) -> Option<Value> {
    let trimmed = raw.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Some(v);
    }
    for (pos, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[pos..]).into_iter::<Value>();
        if let Some(Ok(v @ Value::Object(_))) = stream.next() {
            return Some(v);
        }
    }
    None
}

/// Parsed pointwise judgment. Out-of-range scores are clamped into `[0, 1]`
/// and flagged rather than rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseVerdict {
    pub score: f64,
    pub clamped: bool,
    pub feedback: Option<String>,
}

pub fn parse_pointwise_score(raw: &str) -> Result<PointwiseVerdict, ParseError> {
    let v = extract_first_json(raw).ok_or(ParseError::NoJson)?;
    let score = v
        .get("judge_score")
        .ok_or(ParseError::MissingField("judge_score"))?
        .as_f64()
        .ok_or(ParseError::ScoreNotNumeric)?;
    let clamped = !(0.0..=1.0).contains(&score);
    Ok(PointwiseVerdict {
        score: score.clamp(0.0, 1.0),
        clamped,
        feedback: v.get("reasoning_feedback").and_then(Value::as_str).map(str::to_string),
    })
}

/// Parses the groupwise ranking reply into tie-aware tiers over rollout ids.
///
/// Every candidate index `1..=k` must appear exactly once; rank values must
/// be integers but need not be contiguous — only their relative order
/// matters. `index_map[i]` is the rollout id presented as candidate `i + 1`.
pub fn parse_groupwise_ranking(
    raw: &str,
    k: usize,
    index_map: &[u32],
) -> Result<TierRanking, ParseError> {
    let v = extract_first_json(raw).ok_or(ParseError::NoJson)?;
    let solutions = v
        .get("solutions")
        .and_then(Value::as_array)
        .ok_or(ParseError::MissingField("solutions"))?;

    let mut rank_by_index: Vec<Option<i64>> = vec![None; k];
    for entry in solutions {
        let index = entry
            .get("index")
            .and_then(Value::as_i64)
            .filter(|i| (1..=k as i64).contains(i))
            .ok_or(ParseError::BadIndex { k })? as usize;
        let rank = entry
            .get("rank")
            .and_then(Value::as_i64)
            .ok_or(ParseError::NonIntegerRank { index })?;
        if rank_by_index[index - 1].replace(rank).is_some() {
            return Err(ParseError::DuplicateIndex { index });
        }
    }
    for (i, rank) in rank_by_index.iter().enumerate() {
        if rank.is_none() {
            return Err(ParseError::MissingIndex { index: i + 1 });
        }
    }

    let mut ranks: Vec<i64> = rank_by_index.iter().map(|r| r.unwrap()).collect();
    ranks.sort_unstable();
    ranks.dedup();
    let tiers: Vec<Vec<u32>> = ranks
        .iter()
        .map(|&r| {
            rank_by_index
                .iter()
                .enumerate()
                .filter(|(_, v)| **v == Some(r))
                .map(|(i, _)| index_map[i])
                .collect()
        })
        .collect();
    TierRanking::new(tiers).map_err(|e| ParseError::InvalidRanking(e.to_string()))
}

/// Serializes a tier partition (over presentation indices, 1-based) into a
/// well-formed ranking reply. Mocks and synthetic judges use this so their
/// output flows through the same parser as a real judge's.
pub fn format_groupwise_reply(tiers: &[Vec<usize>]) -> String {
    let mut entries: Vec<(usize, usize)> = Vec::new();
    for (tier_idx, tier) in tiers.iter().enumerate() {
        for &index in tier {
            entries.push((index, tier_idx + 1));
        }
    }
    entries.sort_unstable();
    let solutions: Vec<Value> = entries
        .into_iter()
        .map(|(index, rank)| {
            serde_json::json!({
                "index": index,
                "rank": rank,
                "justification": "scripted",
                "agreement_with_reference": "match",
            })
        })
        .collect();
    serde_json::json!({ "solutions": solutions }).to_string()
}

/// Single-token step verdict: `+` passes, `-` (ASCII or U+2212) fails.
pub fn parse_prm_token(raw: &str) -> Result<bool, ParseError> {
    match raw.trim_start().chars().next() {
        Some('+') => Ok(true),
        Some('-') | Some('−') => Ok(false),
        _ => Err(ParseError::BadToken(raw.trim().chars().take(16).collect())),
    }
}

pub fn parse_consistency_verdict(raw: &str) -> Result<ConsistencyVerdict, ParseError> {
    let v = extract_first_json(raw).ok_or(ParseError::NoJson)?;
    let verdict = v
        .get("verdict")
        .and_then(Value::as_str)
        .ok_or(ParseError::MissingField("verdict"))?;
    if verdict.eq_ignore_ascii_case("consistent") {
        Ok(ConsistencyVerdict::Consistent)
    } else if verdict.eq_ignore_ascii_case("inconsistent") {
        Ok(ConsistencyVerdict::Inconsistent)
    } else if verdict.eq_ignore_ascii_case("na") || verdict.eq_ignore_ascii_case("n/a") {
        Ok(ConsistencyVerdict::Abstain)
    } else {
        Err(ParseError::BadVerdict(verdict.to_string()))
    }
}
