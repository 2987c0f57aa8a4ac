//! Consistency auditing over prediction files: verifier, consistency judge,
//! metrics report, and optional CSV artifacts.

use std::fs::File;
use std::io::BufReader;

use anyhow::{Context, Result};
use serde_json::json;

use groupward::consistency::{audit_predictions, compute_metrics_by_dataset};
use groupward::jsonl::read_prediction_records;

use crate::cli::AuditArgs;
use crate::commands::{http_gateway, resolve_config};
use crate::report::{curve_csv, metrics_table, verdict_csv};

pub async fn run(args: AuditArgs) -> Result<()> {
    let config = resolve_config(&args.common)?;
    let input = File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let outcome = read_prediction_records(BufReader::new(input))?;
    for e in &outcome.errors {
        tracing::warn!("skipping malformed prediction {e}");
    }
    if outcome.records.is_empty() {
        anyhow::bail!("no valid prediction records in {}", args.input.display());
    }

    let gateway = http_gateway(&config)?;
    let records = audit_predictions(&outcome.records, &gateway, &config.verifier).await;
    let degraded = records.iter().filter(|r| r.judge_degraded).count();
    let grouped = compute_metrics_by_dataset(&records)?;

    let report = json!({
        "pooled": grouped.pooled,
        "per_dataset": grouped.per_dataset,
        "macro_average": grouped.macro_average,
        "n_judge_degraded": degraded,
        "n_malformed_lines": outcome.errors.len(),
        "config_digest": config.digest(),
    });
    std::fs::write(&args.report, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", args.report.display()))?;

    print!("{}", metrics_table(&grouped));
    if degraded > 0 {
        println!("judge degraded on {degraded} record(s); their verdicts abstained");
    }

    if let Some(path) = &args.csv {
        std::fs::write(path, verdict_csv(&records)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(curve) = curve_csv(&records)? {
        let path = args
            .curve
            .clone()
            .unwrap_or_else(|| args.report.with_extension("curve.csv"));
        std::fs::write(&path, curve).with_context(|| format!("writing {}", path.display()))?;
        println!("step curve written to {}", path.display());
    }
    Ok(())
}
