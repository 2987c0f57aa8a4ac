//! Stability protocol runs: synthetic desk-scale comparisons or endpoint
//! reruns over fixed rollout groups.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::sync::Arc;

use anyhow::{Context, Result};

use groupward::judge::HttpJudgeTransport;
use groupward::stability::{
    compare_schemes_synthetic, mean_reward_variance, reduction_between, run_repeats, Scheme,
    SchemeStats, StabilityReport, StabilityRunConfig, write_tensor_jsonl, ReferenceValues,
    RewardTensor,
};

use crate::cli::{JudgeChoice, StabilityArgs};
use crate::commands::resolve_config;
use crate::config::judge_api_key;
use crate::report::stability_table;

pub async fn run(args: StabilityArgs) -> Result<()> {
    let service = resolve_config(&args.common)?;
    let schemes: Vec<Scheme> = if args.schemes.is_empty() {
        vec![Scheme::GrPointwise, Scheme::RankGroupwise]
    } else {
        args.schemes.iter().map(|&s| s.into()).collect()
    };
    let config = StabilityRunConfig {
        n_prompts: args.prompts,
        rollouts_per_prompt: args.rollouts,
        repeats: args.repeats,
        temperature: args.common.temperature.unwrap_or(0.7),
        schemes,
        seed: args.seed,
        sigma_p: args.sigma_p,
        p_swap: args.p_swap,
        reward: service.reward.clone(),
        verifier: service.verifier.clone(),
        judge: service.judge.clone(),
    };
    config.validate()?;

    let (report, tensors) = match args.judge {
        JudgeChoice::Synthetic => compare_schemes_synthetic(&config).await?,
        JudgeChoice::Endpoint => endpoint_run(&args, &config).await?,
    };

    let mut tensor_writer = BufWriter::new(
        File::create(&args.tensors)
            .with_context(|| format!("creating {}", args.tensors.display()))?,
    );
    for (scheme, tensor) in &tensors {
        write_tensor_jsonl(*scheme, tensor, &mut tensor_writer)?;
    }
    std::fs::write(&args.report, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", args.report.display()))?;

    print!("{}", stability_table(&report));
    println!("report written to {}", args.report.display());
    println!("tensors written to {}", args.tensors.display());
    Ok(())
}

/// Endpoint mode: the same transport serves every repeat; randomness comes
/// from the judge's own sampling temperature.
async fn endpoint_run(
    args: &StabilityArgs,
    config: &StabilityRunConfig,
) -> Result<(StabilityReport, Vec<(Scheme, RewardTensor)>)> {
    let groups = match &args.input {
        Some(path) => {
            let file =
                File::open(path).with_context(|| format!("opening {}", path.display()))?;
            groupward::jsonl::read_rollout_groups(BufReader::new(file))?
                .require_clean()
                .map_err(|e| anyhow::anyhow!("fixed rollout file: {e}"))?
        }
        None => groupward::stability::synthetic_groups(config),
    };
    let transport = Arc::new(
        HttpJudgeTransport::new(
            config.judge.base_url.clone(),
            std::time::Duration::from_millis(config.judge.timeout_ms),
            judge_api_key(),
        )
        .map_err(|e| anyhow::anyhow!("building judge transport: {e}"))?,
    );

    let mut tensors = Vec::new();
    let mut stats = Vec::new();
    for &scheme in &config.schemes {
        let tensor = run_repeats(&groups, scheme, config, |_| transport.clone()).await?;
        let v = mean_reward_variance(&tensor)?;
        stats.push(SchemeStats {
            scheme,
            mean_variance: v.mean_variance,
            cells: v.cells,
            excluded_cells: v.excluded_cells,
        });
        tensors.push((scheme, tensor));
    }
    let reduction = match (
        tensors.iter().find(|(s, _)| *s == Scheme::GrPointwise),
        tensors.iter().find(|(s, _)| *s == Scheme::RankGroupwise),
    ) {
        (Some((_, p)), Some((_, g))) => reduction_between(p, g)?,
        _ => None,
    };
    Ok((
        StabilityReport {
            seed: config.seed,
            n_prompts: groups.len(),
            rollouts_per_prompt: groups.iter().map(|g| g.len()).max().unwrap_or(0),
            repeats: config.repeats,
            sigma_p: config.sigma_p,
            p_swap: config.p_swap,
            schemes: stats,
            reduction,
            reference_large_scale: ReferenceValues::default(),
        },
        tensors,
    ))
}
