//! Consistency auditing through the gateway: structural abstention, judge
//! verdicts, and degradation on failure.

use std::sync::Arc;

use groupward::consistency::{audit_predictions, compute_metrics, ConsistencyVerdict};
use groupward::jsonl::read_prediction_records;
use groupward::judge::mock::{scripted, JudgeScript, ScriptFallback, ScriptRule, SequenceTransport};
use groupward::judge::{JudgeEndpointConfig, JudgeGateway, RequestKind};
use groupward::verifier::VerifierConfig;

fn gateway(script: JudgeScript) -> JudgeGateway {
    let config = JudgeEndpointConfig {
        retry_budget: 0,
        retry_backoff_ms: 1,
        ..JudgeEndpointConfig::default()
    };
    JudgeGateway::new(config, scripted(script)).unwrap()
}

const PREDICTIONS: &str = concat!(
    r#"{"prompt_id":"a","question":"q1","reference_answer":"10","raw_text":"<think>derive X=-11</think>\\boxed{10}","dataset":"demo"}"#,
    "\n",
    r#"{"prompt_id":"b","question":"q2","reference_answer":"10","raw_text":"<think>therefore 10</think>\\boxed{10}","dataset":"demo"}"#,
    "\n",
    r#"{"prompt_id":"c","question":"q3","reference_answer":"10","raw_text":"I cannot find the answer"}"#,
    "\n",
);

#[tokio::test]
async fn audits_mixed_batch_with_structural_abstention() {
    let preds = read_prediction_records(PREDICTIONS.as_bytes())
        .unwrap()
        .require_clean()
        .unwrap();
    let script = JudgeScript {
        rules: vec![
            ScriptRule {
                kind: Some(RequestKind::Consistency),
                contains: "derive X=-11".into(),
                reply: r#"{"analysis":"trajectory implies -11, box says 10","verdict":"inconsistent"}"#.into(),
            },
            ScriptRule {
                kind: Some(RequestKind::Consistency),
                contains: "therefore 10".into(),
                reply: r#"{"analysis":"agrees","verdict":"consistent"}"#.into(),
            },
        ],
        fallback: ScriptFallback::default(),
    };
    let gateway = gateway(script);
    let records = audit_predictions(&preds, &gateway, &VerifierConfig::default()).await;

    assert_eq!(records[0].verdict, ConsistencyVerdict::Inconsistent);
    assert!(records[0].correct, "boxed 10 matches reference 10");
    assert_eq!(records[1].verdict, ConsistencyVerdict::Consistent);
    assert_eq!(records[2].verdict, ConsistencyVerdict::Abstain);
    assert!(!records[2].judge_degraded, "structural abstention is not a judge failure");
    // the structurally invalid record must not reach the judge
    assert_eq!(gateway.transcript_count(), 2);

    let m = compute_metrics(&records).unwrap();
    assert_eq!(m.n_total, 3);
    assert_eq!(m.n_abstain, 1);
    assert_eq!(m.n_correct_inconsistent, 1);
    // abstention leaves the inconsistency denominator at 2
    assert_eq!(m.inc_r, Some(0.5));
}

#[tokio::test]
async fn judge_failure_degrades_to_flagged_abstention() {
    let preds = read_prediction_records(PREDICTIONS.as_bytes())
        .unwrap()
        .require_clean()
        .unwrap();
    let config = JudgeEndpointConfig {
        retry_budget: 0,
        retry_backoff_ms: 1,
        ..JudgeEndpointConfig::default()
    };
    // every judge call fails; both judged records degrade
    let gateway = JudgeGateway::new(config, Arc::new(SequenceTransport::new(vec![]))).unwrap();
    let records = audit_predictions(&preds, &gateway, &VerifierConfig::default()).await;
    assert!(records[0].judge_degraded);
    assert_eq!(records[0].verdict, ConsistencyVerdict::Abstain);
    assert!(records[1].judge_degraded);
    assert!(!records[2].judge_degraded);

    let m = compute_metrics(&records).unwrap();
    assert_eq!(m.inc_r, None, "all-abstain batches leave IncR undefined");
    assert!(m.acc > 0.0, "accuracy is still defined");
}
