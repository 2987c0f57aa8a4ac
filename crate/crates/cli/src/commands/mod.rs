pub mod audit;
pub mod mock_judge;
pub mod score;
pub mod serve;
pub mod stability;

use std::sync::Arc;

use anyhow::Result;

use groupward::judge::{HttpJudgeTransport, JudgeGateway};
use groupward::pipeline::PipelineConfig;

use crate::cli::CommonConfigArgs;
use crate::config::{judge_api_key, ServiceConfig};

/// Resolves config with CLI > env > file precedence.
pub fn resolve_config(common: &CommonConfigArgs) -> Result<ServiceConfig> {
    let mut config = ServiceConfig::load(common.config.as_deref())?;
    if let Some(v) = &common.judge_url {
        config.judge.base_url = v.clone();
    }
    if let Some(v) = &common.judge_model {
        config.judge.model_name = v.clone();
    }
    if let Some(v) = common.temperature {
        config.judge.temperature = v;
    }
    if let Some(v) = common.retry_budget {
        config.judge.retry_budget = v;
    }
    if let Some(v) = common.max_concurrent {
        config.judge.max_concurrent_requests = v;
    }
    if let Some(v) = common.numeric_tolerance {
        config.verifier.numeric_tolerance = v;
    }
    if let Some(v) = common.strip_units {
        config.verifier.strip_units = v;
    }
    if let Some(v) = common.case_fold {
        config.verifier.case_fold = v;
    }
    if let Some(v) = common.option_letter_mode {
        config.verifier.option_letter_mode = v.into();
    }
    Ok(config)
}

pub fn http_gateway(config: &ServiceConfig) -> Result<Arc<JudgeGateway>> {
    let transport = HttpJudgeTransport::new(
        config.judge.base_url.clone(),
        std::time::Duration::from_millis(config.judge.timeout_ms),
        judge_api_key(),
    )
    .map_err(|e| anyhow::anyhow!("building judge transport: {e}"))?;
    Ok(Arc::new(JudgeGateway::new(config.judge.clone(), Arc::new(transport))?))
}

pub fn pipeline_config(config: &ServiceConfig) -> PipelineConfig {
    PipelineConfig { verifier: config.verifier.clone(), reward: config.reward.clone() }
}
