//! Reasoning-answer consistency auditing and evaluation metrics.
//!
//! A trajectory is inconsistent when the conclusion it derives disagrees
//! with the boxed final answer. The auditor asks a judge to decide this per
//! record (abstaining without a judge call when no valid boxed answer
//! exists) and folds the verdicts into accuracy, inconsistency rate,
//! correct-but-inconsistent rate, and reliability-conditioned accuracy.

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::PredictionRecord;
use crate::judge::prompts::render_consistency_prompt;
use crate::judge::{ChatMessage, JudgeGateway};
use crate::rollout::{split_response, PromptRecord};
use crate::verifier::{verify, VerifierConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyVerdict {
    Consistent,
    Inconsistent,
    /// No valid final answer, or the judge was unavailable after retries.
    Abstain,
}

impl std::fmt::Display for ConsistencyVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConsistencyVerdict::Consistent => write!(f, "consistent"),
            ConsistencyVerdict::Inconsistent => write!(f, "inconsistent"),
            ConsistencyVerdict::Abstain => write!(f, "abstain"),
        }
    }
}

/// One audited prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub prompt: PromptRecord,
    pub trajectory: String,
    pub boxed_answer: Option<String>,
    /// Verifier outcome for the boxed answer against the reference.
    pub correct: bool,
    pub verdict: ConsistencyVerdict,
    /// True when the verdict degraded to abstain because the judge failed.
    pub judge_degraded: bool,
    pub dataset: Option<String>,
    pub step: Option<u64>,
}

/// Decides consistency for one record. Structurally invalid answers abstain
/// locally without a judge call; judge failures degrade to abstain with the
/// degraded flag set, never to a fabricated verdict.
pub async fn judge_consistency(
    prompt: &PromptRecord,
    trajectory: &str,
    boxed_answer: Option<&str>,
    gateway: &JudgeGateway,
) -> (ConsistencyVerdict, bool) {
    let Some(boxed) = boxed_answer else {
        return (ConsistencyVerdict::Abstain, false);
    };
    let text = render_consistency_prompt(
        &prompt.question,
        prompt.options.as_deref(),
        trajectory,
        boxed,
    );
    match gateway.consistency(vec![ChatMessage::user(text)]).await {
        Ok((verdict, _)) => (verdict, false),
        Err(_) => (ConsistencyVerdict::Abstain, true),
    }
}

/// Audits a batch of predictions: split each raw response, verify the boxed
/// answer, then judge consistency. Judging runs concurrently up to the
/// gateway bound; output order matches input order.
pub async fn audit_predictions(
    predictions: &[PredictionRecord],
    gateway: &JudgeGateway,
    verifier: &VerifierConfig,
) -> Vec<EvalRecord> {
    let concurrency = gateway.config().max_concurrent_requests;
    stream::iter(predictions.iter().map(|p| audit_one(p, gateway, verifier)))
        .buffered(concurrency.max(1))
        .collect()
        .await
}

async fn audit_one(
    prediction: &PredictionRecord,
    gateway: &JudgeGateway,
    verifier: &VerifierConfig,
) -> EvalRecord {
    let prompt = PromptRecord {
        prompt_id: prediction.prompt_id.clone(),
        question: prediction.question.clone(),
        image_ref: prediction.image_ref.clone(),
        reference_answer: prediction.reference_answer.clone(),
        options: prediction.options.clone(),
    };
    let split = split_response(&prediction.raw_text);
    let correct = verify(
        split.boxed_answer.as_deref(),
        &prompt.reference_answer,
        prompt.options.as_deref(),
        verifier,
    );
    let (verdict, judge_degraded) =
        judge_consistency(&prompt, &split.trajectory, split.boxed_answer.as_deref(), gateway)
            .await;
    EvalRecord {
        prompt,
        trajectory: split.trajectory,
        boxed_answer: split.boxed_answer,
        correct,
        verdict,
        judge_degraded,
        dataset: prediction.dataset.clone(),
        step: prediction.step,
    }
}

/// Aggregate rates over one record set. `inc_r` is `None` when every record
/// abstained (undefined denominator). `rc_acc` is computed from counts, so
/// `rc_acc == acc - cbir` holds as an identity of the underlying fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub n_total: usize,
    pub n_correct: usize,
    pub n_abstain: usize,
    pub n_inconsistent: usize,
    pub n_correct_inconsistent: usize,
    /// Answer accuracy: `n_correct / n_total`.
    pub acc: f64,
    /// Inconsistency rate over non-abstained records.
    pub inc_r: Option<f64>,
    /// Correct-but-inconsistent rate over all records.
    pub cbir: f64,
    /// Reliability-conditioned accuracy: accuracy minus the
    /// correct-but-inconsistent rate.
    pub rc_acc: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    NoRecords,
}

/// Verdict counts feeding the metric rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MetricCounts {
    pub n_total: usize,
    pub n_correct: usize,
    pub n_abstain: usize,
    pub n_inconsistent: usize,
    pub n_correct_inconsistent: usize,
}

impl MetricCounts {
    pub fn tally(records: &[EvalRecord]) -> Self {
        let mut c = MetricCounts { n_total: records.len(), ..Default::default() };
        for r in records {
            if r.correct {
                c.n_correct += 1;
            }
            match r.verdict {
                ConsistencyVerdict::Abstain => c.n_abstain += 1,
                ConsistencyVerdict::Inconsistent => {
                    c.n_inconsistent += 1;
                    if r.correct {
                        c.n_correct_inconsistent += 1;
                    }
                }
                ConsistencyVerdict::Consistent => {}
            }
        }
        c
    }

    pub fn summarize(self) -> Result<MetricsSummary, MetricsError> {
        if self.n_total == 0 {
            return Err(MetricsError::NoRecords);
        }
        let n = self.n_total as f64;
        let judged = self.n_total - self.n_abstain;
        Ok(MetricsSummary {
            n_total: self.n_total,
            n_correct: self.n_correct,
            n_abstain: self.n_abstain,
            n_inconsistent: self.n_inconsistent,
            n_correct_inconsistent: self.n_correct_inconsistent,
            acc: self.n_correct as f64 / n,
            inc_r: (judged > 0).then(|| self.n_inconsistent as f64 / judged as f64),
            cbir: self.n_correct_inconsistent as f64 / n,
            rc_acc: (self.n_correct - self.n_correct_inconsistent) as f64 / n,
        })
    }
}

/// Metrics over all records pooled together.
pub fn compute_metrics(records: &[EvalRecord]) -> Result<MetricsSummary, MetricsError> {
    MetricCounts::tally(records).summarize()
}

/// Per-dataset metrics with an equal-weight macro average across datasets.
#[derive(Debug, Clone, Serialize)]
pub struct GroupedMetrics {
    pub pooled: MetricsSummary,
    pub per_dataset: Vec<(String, MetricsSummary)>,
    /// Equal-weight mean of per-dataset rates; meaningful when datasets are
    /// equally sized samples. `None` when only one bucket exists.
    pub macro_average: Option<MacroAverage>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroAverage {
    pub acc: f64,
    pub inc_r: Option<f64>,
    pub cbir: f64,
    pub rc_acc: f64,
}

pub const UNTAGGED_DATASET: &str = "(untagged)";

pub fn compute_metrics_by_dataset(records: &[EvalRecord]) -> Result<GroupedMetrics, MetricsError> {
    let pooled = compute_metrics(records)?;
    let mut buckets: Vec<(String, Vec<&EvalRecord>)> = Vec::new();
    for r in records {
        let name = r.dataset.clone().unwrap_or_else(|| UNTAGGED_DATASET.to_string());
        match buckets.iter_mut().find(|(n, _)| *n == name) {
            Some((_, bucket)) => bucket.push(r),
            None => buckets.push((name, vec![r])),
        }
    }
    buckets.sort_by(|a, b| a.0.cmp(&b.0));
    let mut per_dataset = Vec::with_capacity(buckets.len());
    for (name, bucket) in buckets {
        let owned: Vec<EvalRecord> = bucket.into_iter().cloned().collect();
        per_dataset.push((name, compute_metrics(&owned)?));
    }
    let macro_average = (per_dataset.len() > 1).then(|| {
        let k = per_dataset.len() as f64;
        let defined: Vec<f64> =
            per_dataset.iter().filter_map(|(_, s)| s.inc_r).collect();
        MacroAverage {
            acc: per_dataset.iter().map(|(_, s)| s.acc).sum::<f64>() / k,
            inc_r: (!defined.is_empty())
                .then(|| defined.iter().sum::<f64>() / defined.len() as f64),
            cbir: per_dataset.iter().map(|(_, s)| s.cbir).sum::<f64>() / k,
            rc_acc: per_dataset.iter().map(|(_, s)| s.rc_acc).sum::<f64>() / k,
        }
    });
    Ok(GroupedMetrics { pooled, per_dataset, macro_average })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(correct: bool, verdict: ConsistencyVerdict, dataset: &str) -> EvalRecord {
        EvalRecord {
            prompt: PromptRecord {
                prompt_id: "p".into(),
                question: "q".into(),
                image_ref: None,
                reference_answer: "1".into(),
                options: None,
            },
            trajectory: "t".into(),
            boxed_answer: Some("1".into()),
            correct,
            verdict,
            judge_degraded: false,
            dataset: Some(dataset.into()),
            step: None,
        }
    }

    #[test]
    fn four_record_hand_case() {
        use ConsistencyVerdict::*;
        let records = vec![
            record(true, Consistent, "d"),
            record(true, Inconsistent, "d"),
            record(false, Consistent, "d"),
            record(false, Abstain, "d"),
        ];
        let m = compute_metrics(&records).unwrap();
        assert_eq!(m.acc, 0.5);
        assert_eq!(m.cbir, 0.25);
        assert_eq!(m.rc_acc, 0.25);
        assert_eq!(m.inc_r, Some(1.0 / 3.0));
        assert_eq!(m.n_correct_inconsistent, 1);
    }

    #[test]
    fn table_counts_give_exact_rc_acc() {
        let counts = MetricCounts {
            n_total: 500,
            n_correct: 268,
            n_abstain: 0,
            n_inconsistent: 31,
            n_correct_inconsistent: 31,
        };
        let m = counts.summarize().unwrap();
        assert_eq!(m.acc, 0.536);
        assert_eq!(m.cbir, 0.062);
        assert_eq!(m.rc_acc, 0.474);
    }

    #[test]
    fn all_abstain_leaves_inc_r_undefined() {
        let records = vec![
            record(true, ConsistencyVerdict::Abstain, "d"),
            record(false, ConsistencyVerdict::Abstain, "d"),
        ];
        let m = compute_metrics(&records).unwrap();
        assert_eq!(m.inc_r, None);
        assert_eq!(m.acc, 0.5);
    }

    #[test]
    fn empty_records_error() {
        assert_eq!(compute_metrics(&[]), Err(MetricsError::NoRecords));
    }

    #[test]
    fn wrong_consistent_records_never_raise_inconsistency() {
        use ConsistencyVerdict::*;
        let mut records = vec![record(true, Inconsistent, "d"), record(false, Consistent, "d")];
        let before = compute_metrics(&records).unwrap();
        records.push(record(false, Consistent, "d"));
        let after = compute_metrics(&records).unwrap();
        assert_eq!(before.n_inconsistent, after.n_inconsistent);
        assert_eq!(before.n_correct_inconsistent, after.n_correct_inconsistent);
        assert!(after.cbir <= before.cbir);
    }

    #[test]
    fn macro_average_matches_pooled_on_equal_partitions() {
        use ConsistencyVerdict::*;
        let mut records = Vec::new();
        for d in ["a", "b"] {
            records.push(record(true, Consistent, d));
            records.push(record(true, Inconsistent, d));
            records.push(record(false, Consistent, d));
            records.push(record(false, Abstain, d));
        }
        // make the buckets differ while staying equal-sized with equal abstention
        records[1] = record(false, Inconsistent, "a");
        let grouped = compute_metrics_by_dataset(&records).unwrap();
        let m = grouped.macro_average.unwrap();
        assert!((m.acc - grouped.pooled.acc).abs() < 1e-12);
        assert!((m.cbir - grouped.pooled.cbir).abs() < 1e-12);
        assert!((m.rc_acc - grouped.pooled.rc_acc).abs() < 1e-12);
        assert!((m.inc_r.unwrap() - grouped.pooled.inc_r.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rc_acc_never_exceeds_acc() {
        use ConsistencyVerdict::*;
        let cases = vec![
            vec![record(true, Consistent, "d")],
            vec![record(true, Inconsistent, "d"), record(true, Consistent, "d")],
            vec![record(false, Inconsistent, "d")],
        ];
        for records in cases {
            let m = compute_metrics(&records).unwrap();
            assert!(m.rc_acc <= m.acc);
            if m.n_correct_inconsistent == 0 {
                assert_eq!(m.rc_acc, m.acc);
            }
        }
    }
}
