//! Judge-stability lab.
//!
//! Reruns reward assignment on fixed rollouts and measures, per (prompt,
//! rollout) cell, the variance of the assigned auxiliary reward across
//! repeats — then averages over all cells. Pointwise scoring and groupwise
//! ranking are compared on identical groups and identical latent qualities,
//! with judge randomness modeled by a seeded synthetic judge so desk-scale
//! runs are exactly reproducible.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;
use std::sync::LazyLock;

use async_trait::async_trait;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::parse::format_groupwise_reply;
use crate::judge::{
    ChatRequest, JudgeEndpointConfig, JudgeGateway, JudgeTransport, RequestKind, TransportError,
};
use crate::pipeline::{score_group_with_judge, GroupFlag, PipelineConfig, PipelineError};
use crate::reward::{AuxKind, RewardConfig};
use crate::rollout::{PromptRecord, Rollout, RolloutGroup};
use crate::verifier::VerifierConfig;

/// Reward schemes covered by the stability protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GrPointwise,
    RankGroupwise,
}

impl Scheme {
    pub fn aux_kind(self) -> AuxKind {
        match self {
            Scheme::GrPointwise => AuxKind::GrPointwise,
            Scheme::RankGroupwise => AuxKind::RankGroupwise,
        }
    }

    fn discriminant(self) -> u64 {
        match self {
            Scheme::GrPointwise => 1,
            Scheme::RankGroupwise => 2,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::GrPointwise => write!(f, "gr_pointwise"),
            Scheme::RankGroupwise => write!(f, "rank_groupwise"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityRunConfig {
    pub n_prompts: usize,
    pub rollouts_per_prompt: usize,
    pub repeats: usize,
    /// Judge sampling temperature for endpoint runs; the synthetic judge is
    /// seed-driven and ignores it.
    pub temperature: f64,
    pub schemes: Vec<Scheme>,
    pub seed: u64,
    /// Spread of the zero-mean perturbation on synthetic pointwise scores.
    pub sigma_p: f64,
    /// Probability of transposing each adjacent tier pair per repeat.
    pub p_swap: f64,
    pub reward: RewardConfig,
    pub verifier: VerifierConfig,
    pub judge: JudgeEndpointConfig,
}

impl Default for StabilityRunConfig {
    fn default() -> Self {
        StabilityRunConfig {
            n_prompts: 500,
            rollouts_per_prompt: 8,
            repeats: 4,
            temperature: 0.7,
            schemes: vec![Scheme::GrPointwise, Scheme::RankGroupwise],
            seed: 0,
            sigma_p: 0.15,
            p_swap: 0.1,
            reward: RewardConfig::default(),
            verifier: VerifierConfig::default(),
            judge: JudgeEndpointConfig::default(),
        }
    }
}

impl StabilityRunConfig {
    pub fn validate(&self) -> Result<(), StabilityError> {
        if self.repeats < 2 {
            return Err(StabilityError::InvalidConfig("repeats must be >= 2".into()));
        }
        if self.rollouts_per_prompt < 2 {
            return Err(StabilityError::InvalidConfig(
                "rollouts_per_prompt must be >= 2".into(),
            ));
        }
        if self.n_prompts == 0 {
            return Err(StabilityError::InvalidConfig("n_prompts must be >= 1".into()));
        }
        if !(self.sigma_p >= 0.0) || !self.sigma_p.is_finite() {
            return Err(StabilityError::InvalidConfig("sigma_p must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.p_swap) {
            return Err(StabilityError::InvalidConfig("p_swap must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("invalid stability config: {0}")]
    InvalidConfig(String),
    #[error("all cells were excluded; no variance to average")]
    AllCellsExcluded,
    #[error("scheme runs cover different group sets")]
    MismatchedGroups,
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Judge(#[from] crate::judge::JudgeError),
}

/// Rewards indexed `[prompt][rollout][repeat]`; `None` marks a cell repeat
/// where judging failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardTensor {
    pub prompt_ids: Vec<String>,
    pub rollout_ids: Vec<Vec<u32>>,
    pub repeats: usize,
    values: Vec<Vec<Vec<Option<f64>>>>,
}

impl RewardTensor {
    fn new(groups: &[RolloutGroup], repeats: usize) -> Self {
        RewardTensor {
            prompt_ids: groups.iter().map(|g| g.prompt.prompt_id.clone()).collect(),
            rollout_ids: groups
                .iter()
                .map(|g| g.rollouts.iter().map(|r| r.rollout_id).collect())
                .collect(),
            repeats,
            values: groups
                .iter()
                .map(|g| vec![vec![None; repeats]; g.rollouts.len()])
                .collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        let rollouts = self.rollout_ids.iter().map(Vec::len).max().unwrap_or(0);
        (self.prompt_ids.len(), rollouts, self.repeats)
    }

    pub fn get(&self, prompt: usize, rollout: usize, repeat: usize) -> Option<f64> {
        self.values[prompt][rollout][repeat]
    }

    fn set(&mut self, prompt: usize, rollout: usize, repeat: usize, value: Option<f64>) {
        self.values[prompt][rollout][repeat] = value;
    }

    /// Iterates cells as slices of per-repeat values.
    pub fn cells(&self) -> impl Iterator<Item = &Vec<Option<f64>>> {
        self.values.iter().flatten()
    }
}

/// Mean per-cell variance over a tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceStats {
    pub mean_variance: f64,
    /// Cells contributing a variance.
    pub cells: usize,
    /// Cells dropped for having fewer than two valid repeats.
    pub excluded_cells: usize,
}

/// Population variance across the valid repeats of each cell, averaged over
/// all cells with at least two valid repeats.
pub fn mean_reward_variance(tensor: &RewardTensor) -> Result<VarianceStats, StabilityError> {
    let mut sum = 0.0;
    let mut cells = 0usize;
    let mut excluded = 0usize;
    for cell in tensor.cells() {
        let valid: Vec<f64> = cell.iter().flatten().copied().collect();
        if valid.len() < 2 {
            excluded += 1;
            continue;
        }
        sum += population_variance(&valid);
        cells += 1;
    }
    if cells == 0 {
        return Err(StabilityError::AllCellsExcluded);
    }
    Ok(VarianceStats { mean_variance: sum / cells as f64, cells, excluded_cells: excluded })
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Latent rollout qualities plus the noise model of a stochastic judge.
/// Emitted scores perturb the latent with zero-mean noise of spread
/// `sigma_p`; emitted rankings transpose adjacent tiers with probability
/// `p_swap` per repeat. All draws are pure functions of `(seed, scheme,
/// repeat, case identity)`, so runs are reproducible under any concurrency.
#[derive(Debug, Clone)]
pub struct SyntheticJudge {
    latents: BTreeMap<(u32, u32), f64>,
    sigma_p: f64,
    p_swap: f64,
    seed: u64,
}

static CASE_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[case (\d+)-(\d+)\]").unwrap());

impl SyntheticJudge {
    /// Draws one latent quality per (prompt, rollout) cell from `seed`.
    pub fn generate(config: &StabilityRunConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, 0x1a7e27, 0));
        let mut latents = BTreeMap::new();
        for p in 0..config.n_prompts as u32 {
            for r in 1..=config.rollouts_per_prompt as u32 {
                latents.insert((p, r), rng.random_range(0.0..1.0));
            }
        }
        SyntheticJudge {
            latents,
            sigma_p: config.sigma_p,
            p_swap: config.p_swap,
            seed: config.seed,
        }
    }

    pub fn latent(&self, prompt: u32, rollout: u32) -> Option<f64> {
        self.latents.get(&(prompt, rollout)).copied()
    }

    /// Transport view of this judge for one (scheme, repeat) pass.
    pub fn transport(&self, scheme: Scheme, repeat: usize) -> Arc<dyn JudgeTransport> {
        Arc::new(SyntheticTransport {
            judge: self.clone(),
            repeat_seed: mix(self.seed, scheme.discriminant(), repeat as u64 + 1),
        })
    }
}

struct SyntheticTransport {
    judge: SyntheticJudge,
    repeat_seed: u64,
}

impl SyntheticTransport {
    fn pointwise_reply(&self, prompt: u32, rollout: u32) -> String {
        let latent = self.judge.latents.get(&(prompt, rollout)).copied().unwrap_or(0.5);
        let score = if self.judge.sigma_p > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(
                self.repeat_seed,
                u64::from(prompt) + 1,
                u64::from(rollout) + 1,
            ));
            let noise = Normal::new(0.0, self.judge.sigma_p)
                .expect("sigma_p validated non-negative")
                .sample(&mut rng);
            (latent + noise).clamp(0.0, 1.0)
        } else {
            latent
        };
        format!(r#"{{"reasoning_feedback":"synthetic","judge_score":{score}}}"#)
    }

    fn groupwise_reply(&self, cases: &[(u32, u32)]) -> String {
        let prompt = cases[0].0;
        // true order: singleton tiers sorted by latent, best first
        let mut order: Vec<usize> = (0..cases.len()).collect();
        order.sort_by(|&a, &b| {
            let la = self.judge.latents.get(&cases[a]).copied().unwrap_or(0.5);
            let lb = self.judge.latents.get(&cases[b]).copied().unwrap_or(0.5);
            lb.partial_cmp(&la).unwrap().then(cases[a].1.cmp(&cases[b].1))
        });
        let mut tiers: Vec<Vec<usize>> = order.into_iter().map(|i| vec![i + 1]).collect();
        if self.judge.p_swap > 0.0 {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix(self.repeat_seed, u64::from(prompt) + 1, 0));
            for i in 0..tiers.len().saturating_sub(1) {
                if rng.random_range(0.0..1.0) < self.judge.p_swap {
                    tiers.swap(i, i + 1);
                }
            }
        }
        format_groupwise_reply(&tiers)
    }
}

#[async_trait]
impl JudgeTransport for SyntheticTransport {
    async fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let text: String = request
            .messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let cases: Vec<(u32, u32)> = CASE_MARKER
            .captures_iter(&text)
            .map(|c| (c[1].parse().unwrap(), c[2].parse().unwrap()))
            .collect();
        if cases.is_empty() {
            return Err(TransportError::Network("no case marker in prompt".to_string()));
        }
        match RequestKind::detect(&request.messages) {
            Some(RequestKind::Pointwise) => Ok(self.pointwise_reply(cases[0].0, cases[0].1)),
            Some(RequestKind::Groupwise) => Ok(self.groupwise_reply(&cases)),
            Some(RequestKind::PrmStep) => Ok("+".to_string()),
            Some(RequestKind::Consistency) => Ok(r#"{"verdict":"consistent"}"#.to_string()),
            None => Err(TransportError::Network("unrecognized prompt family".to_string())),
        }
    }
}

/// splitmix64-style mixer for deriving per-identity seeds.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed synthetic groups whose candidates carry `[case p-r]` markers the
/// synthetic judge keys on. Every rollout passes verification.
pub fn synthetic_groups(config: &StabilityRunConfig) -> Vec<RolloutGroup> {
    (0..config.n_prompts as u32)
        .map(|p| {
            let prompt = PromptRecord {
                prompt_id: format!("p{p:04}"),
                question: format!("Synthetic stability case {p}"),
                image_ref: None,
                reference_answer: "42".to_string(),
                options: None,
            };
            let rollouts = (1..=config.rollouts_per_prompt as u32)
                .map(|r| {
                    Rollout::from_raw(
                        r,
                        format!("<think>[case {p}-{r}] synthetic derivation</think>\\boxed{{42}}"),
                    )
                })
                .collect();
            RolloutGroup::new(prompt, rollouts).expect("synthetic groups are valid")
        })
        .collect()
}

/// Reruns the full scheme pipeline (judge call, parse, mapping, centering)
/// over fixed groups, once per repeat, recording the auxiliary reward that
/// training would consume. Cells whose judging failed are marked `None`.
pub async fn run_repeats<F>(
    groups: &[RolloutGroup],
    scheme: Scheme,
    config: &StabilityRunConfig,
    transport_for_repeat: F,
) -> Result<RewardTensor, StabilityError>
where
    F: Fn(usize) -> Arc<dyn JudgeTransport>,
{
    config.validate()?;
    let mut tensor = RewardTensor::new(groups, config.repeats);
    let pipeline = PipelineConfig {
        verifier: config.verifier.clone(),
        reward: RewardConfig { aux_kind: scheme.aux_kind(), ..config.reward.clone() },
    };
    for repeat in 0..config.repeats {
        let judge_config = JudgeEndpointConfig {
            temperature: config.temperature,
            ..config.judge.clone()
        };
        let gateway = JudgeGateway::new(judge_config, transport_for_repeat(repeat))?;
        for (p, group) in groups.iter().enumerate() {
            let scored = score_group_with_judge(group, &gateway, &pipeline).await?;
            let ranking_failed = scored
                .flags
                .iter()
                .any(|f| matches!(f, GroupFlag::RankingUnavailable { .. }));
            for (r, breakdown) in scored.breakdowns.iter().enumerate() {
                let failed_cell = ranking_failed && breakdown.r_ver == 1
                    || scored.flags.iter().any(|f| match f {
                        GroupFlag::PointwiseFallback { rollout_id, .. }
                        | GroupFlag::PrmFallback { rollout_id, .. }
                        | GroupFlag::PrmNoSteps { rollout_id } => {
                            *rollout_id == breakdown.rollout_id
                        }
                        _ => false,
                    });
                let value = (!failed_cell).then_some(breakdown.r_aux);
                tensor.set(p, r, repeat, value);
            }
        }
    }
    Ok(tensor)
}

/// Reference magnitudes from a production-scale run of this protocol with
/// an external judge endpoint; kept in the report for comparison. They are
/// not reproducible with the synthetic judge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceValues {
    pub pointwise_mean_variance: f64,
    pub groupwise_mean_variance: f64,
    pub reduction: f64,
    pub note: &'static str,
}

impl Default for ReferenceValues {
    fn default() -> Self {
        ReferenceValues {
            pointwise_mean_variance: 0.026,
            groupwise_mean_variance: 0.016,
            reduction: 0.376,
            note: "large-scale endpoint-judge reference; not reproducible with the synthetic judge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeStats {
    pub scheme: Scheme,
    pub mean_variance: f64,
    pub cells: usize,
    pub excluded_cells: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub seed: u64,
    pub n_prompts: usize,
    pub rollouts_per_prompt: usize,
    pub repeats: usize,
    pub sigma_p: f64,
    pub p_swap: f64,
    pub schemes: Vec<SchemeStats>,
    /// Relative variance reduction of groupwise ranking versus pointwise:
    /// `(v_point - v_group) / v_point`; `None` when undefined.
    pub reduction: Option<f64>,
    pub reference_large_scale: ReferenceValues,
}

/// Relative reduction between two tensors over the same group set.
pub fn reduction_between(
    pointwise: &RewardTensor,
    groupwise: &RewardTensor,
) -> Result<Option<f64>, StabilityError> {
    if pointwise.prompt_ids != groupwise.prompt_ids
        || pointwise.rollout_ids != groupwise.rollout_ids
    {
        return Err(StabilityError::MismatchedGroups);
    }
    let vp = mean_reward_variance(pointwise)?.mean_variance;
    let vg = mean_reward_variance(groupwise)?.mean_variance;
    Ok((vp > 0.0).then(|| (vp - vg) / vp))
}

/// Runs the full protocol with the synthetic judge: identical groups and
/// latent qualities for every scheme, judge noise varying per repeat.
/// Returns the report and the per-scheme tensors for persistence.
pub async fn compare_schemes_synthetic(
    config: &StabilityRunConfig,
) -> Result<(StabilityReport, Vec<(Scheme, RewardTensor)>), StabilityError> {
    config.validate()?;
    let groups = synthetic_groups(config);
    let judge = SyntheticJudge::generate(config);
    let mut tensors = Vec::new();
    let mut stats = Vec::new();
    for &scheme in &config.schemes {
        let tensor =
            run_repeats(&groups, scheme, config, |repeat| judge.transport(scheme, repeat))
                .await?;
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
            n_prompts: config.n_prompts,
            rollouts_per_prompt: config.rollouts_per_prompt,
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

/// Persists a tensor as JSONL, one line per (prompt, rollout, repeat) cell.
pub fn write_tensor_jsonl<W: Write>(
    scheme: Scheme,
    tensor: &RewardTensor,
    mut writer: W,
) -> std::io::Result<()> {
    for (p, prompt_id) in tensor.prompt_ids.iter().enumerate() {
        for (r, rollout_id) in tensor.rollout_ids[p].iter().enumerate() {
            for repeat in 0..tensor.repeats {
                let line = serde_json::json!({
                    "scheme": scheme,
                    "prompt_id": prompt_id,
                    "rollout_id": rollout_id,
                    "repeat": repeat,
                    "r_aux": tensor.get(p, r, repeat),
                });
                writeln!(writer, "{line}")?;
            }
        }
    }
    Ok(())
}
