//! Configuration loading with CLI > environment > file precedence, plus a
//! stable digest of the resolved config for reproducibility logging.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use groupward::judge::JudgeEndpointConfig;
use groupward::reward::RewardConfig;
use groupward::verifier::VerifierConfig;

pub const ENV_PREFIX: &str = "GROUPWARD_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    /// Maximum accepted request body, in bytes.
    pub request_size_limit: usize,
    pub log_level: String,
    pub verifier: VerifierConfig,
    pub reward: RewardConfig,
    pub judge: JudgeEndpointConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".to_string(),
            request_size_limit: 4 * 1024 * 1024,
            log_level: "info".to_string(),
            verifier: VerifierConfig::default(),
            reward: RewardConfig::default(),
            judge: JudgeEndpointConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => ServiceConfig::default(),
        };
        config.apply_env();
        Ok(config)
    }

    /// Environment overrides; secrets (the judge API key) are env-only and
    /// never appear in the config or its digest.
    fn apply_env(&mut self) {
        if let Ok(v) = std::env::var(format!("{ENV_PREFIX}LISTEN")) {
            self.listen = v;
        }
        if let Ok(v) = std::env::var(format!("{ENV_PREFIX}LOG_LEVEL")) {
            self.log_level = v;
        }
        if let Ok(v) = std::env::var(format!("{ENV_PREFIX}JUDGE_BASE_URL")) {
            self.judge.base_url = v;
        }
        if let Ok(v) = std::env::var(format!("{ENV_PREFIX}JUDGE_MODEL")) {
            self.judge.model_name = v;
        }
        if let Ok(v) = std::env::var(format!("{ENV_PREFIX}JUDGE_TEMPERATURE")) {
            if let Ok(t) = v.parse() {
                self.judge.temperature = t;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.listen.parse::<std::net::SocketAddr>().context("listen address is not valid")?;
        self.reward.validate().map_err(anyhow::Error::from)?;
        self.judge.validate().map_err(anyhow::Error::from)?;
        if !(self.verifier.numeric_tolerance >= 0.0) {
            anyhow::bail!("verifier.numeric_tolerance must be >= 0");
        }
        Ok(())
    }

    /// Short hex digest of the resolved config; identical configs always
    /// digest identically.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hex::encode(&hash[..8])
    }
}

pub fn judge_api_key() -> Option<String> {
    std::env::var(format!("{ENV_PREFIX}JUDGE_API_KEY")).ok()
}
