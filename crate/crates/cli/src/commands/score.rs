//! Batch scoring: stream rollout groups through the same pipeline the
//! service runs, writing one reward line per group.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use anyhow::{Context, Result};

use groupward::jsonl::{read_rollout_groups, write_group_rewards};
use groupward::pipeline::score_group_with_judge;

use crate::cli::ScoreArgs;
use crate::commands::{http_gateway, pipeline_config, resolve_config};

pub async fn run(args: ScoreArgs) -> Result<()> {
    let mut config = resolve_config(&args.common)?;
    if let Some(v) = args.aux_kind {
        config.reward.aux_kind = v.into();
    }
    if let Some(v) = args.mapping {
        config.reward.mapping = v.into();
    }
    if let Some(v) = args.lambda {
        config.reward.lambda = v;
    }
    if let Some(v) = args.edn_gamma {
        config.reward.edn_gamma = v;
    }
    config.reward.validate().context("invalid reward config")?;
    tracing::info!(digest = config.digest(), "scoring with resolved config");

    let input = File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let outcome = read_rollout_groups(BufReader::new(input))?;
    for e in &outcome.errors {
        tracing::warn!("skipping malformed input {e}");
    }
    let malformed = outcome.errors.len();

    let gateway = http_gateway(&config)?;
    let pipeline = pipeline_config(&config);
    let mut writer = BufWriter::new(
        File::create(&args.output)
            .with_context(|| format!("creating {}", args.output.display()))?,
    );

    let mut judge_failures = 0usize;
    let mut aux_sum = 0.0;
    let mut aux_count = 0usize;
    for group in &outcome.records {
        let scored = score_group_with_judge(group, &gateway, &pipeline)
            .await
            .with_context(|| format!("scoring group {}", group.prompt.prompt_id))?;
        if scored.judge_failure().is_some() {
            judge_failures += 1;
        }
        for b in &scored.breakdowns {
            aux_sum += b.r_aux;
            aux_count += 1;
        }
        write_group_rewards(std::slice::from_ref(&scored.group_rewards()), &mut writer)?;
    }
    writer.flush()?;

    let mean_aux = if aux_count > 0 { aux_sum / aux_count as f64 } else { 0.0 };
    println!(
        "groups={} judge_failures={} malformed_lines={} mean_r_aux={:.6}",
        outcome.records.len(),
        judge_failures,
        malformed,
        mean_aux
    );
    Ok(())
}
