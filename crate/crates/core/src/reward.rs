//! Pure numerical reward core.
//!
//! Covers step-score aggregation, the four rank-to-score mappings over
//! tie-aware tier rankings, within-group centering, reward combination, and
//! group-standardized advantages. Everything here is a pure function over
//! immutable inputs and safe to call from any number of workers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rollout::RolloutGroup;

/// Ordered tie-aware tiers over verifier-passed rollout ids. The first tier
/// is best. Tiers are disjoint, nonempty, and partition the passed set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct TierRanking {
    tiers: Vec<Vec<u32>>,
}

impl TierRanking {
    pub fn new(tiers: Vec<Vec<u32>>) -> Result<Self, RewardError> {
        if tiers.is_empty() {
            return Err(RewardError::EmptyRanking);
        }
        let mut seen = BTreeSet::new();
        let mut sorted = Vec::with_capacity(tiers.len());
        for tier in tiers {
            if tier.is_empty() {
                return Err(RewardError::EmptyTier);
            }
            for &id in &tier {
                if !seen.insert(id) {
                    return Err(RewardError::DuplicateInRanking { rollout_id: id });
                }
            }
            let mut tier = tier;
            tier.sort_unstable();
            sorted.push(tier);
        }
        Ok(TierRanking { tiers: sorted })
    }

    pub fn tiers(&self) -> &[Vec<u32>] {
        &self.tiers
    }

    /// The verifier-passed index set this ranking partitions.
    pub fn passed_set(&self) -> BTreeSet<u32> {
        self.tiers.iter().flatten().copied().collect()
    }

    /// Number of ranked rollouts (K).
    pub fn passed_count(&self) -> usize {
        self.tiers.iter().map(Vec::len).sum()
    }

    pub fn tier_count(&self) -> usize {
        self.tiers.len()
    }
}

impl TryFrom<Vec<Vec<u32>>> for TierRanking {
    type Error = RewardError;
    fn try_from(tiers: Vec<Vec<u32>>) -> Result<Self, Self::Error> {
        TierRanking::new(tiers)
    }
}

impl From<TierRanking> for Vec<Vec<u32>> {
    fn from(r: TierRanking) -> Self {
        r.tiers
    }
}

/// Rank-to-score mapping applied to a tier ranking before centering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum MappingKind {
    /// Tie-aware pairwise win rate.
    Pcs,
    /// Exponentially decaying tier score, min-max normalized.
    Edn { decay: f64 },
    /// Evenly spaced linear tier scores.
    Trs,
    /// Reciprocal tier rank, min-max normalized.
    Irn,
}

impl MappingKind {
    pub fn edn(decay: f64) -> Result<Self, RewardError> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(RewardError::InvalidDecay { decay });
        }
        Ok(MappingKind::Edn { decay })
    }

    fn validate(&self) -> Result<(), RewardError> {
        if let MappingKind::Edn { decay } = self {
            if !(*decay > 0.0 && *decay < 1.0) {
                return Err(RewardError::InvalidDecay { decay: *decay });
            }
        }
        Ok(())
    }
}

/// Which auxiliary trajectory signal fills `r_aux`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    Prm,
    GrPointwise,
    RankGroupwise,
}

impl std::fmt::Display for AuxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AuxKind::Prm => write!(f, "prm"),
            AuxKind::GrPointwise => write!(f, "gr_pointwise"),
            AuxKind::RankGroupwise => write!(f, "rank_groupwise"),
        }
    }
}

/// Named mapping selector as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MappingName {
    #[default]
    Pcs,
    Edn,
    Trs,
    Irn,
}

/// How a trajectory is cut into steps for per-step judging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepSplit {
    /// Blank-line boundaries, with ordinal markers ("1.", "Step 2:")
    /// starting a new step as well.
    #[default]
    BlankLineOrOrdinal,
    /// Blank-line boundaries only.
    BlankLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Auxiliary reward weight (λ).
    pub lambda: f64,
    /// Advantage stabilizer added to the group standard deviation.
    pub eps_a: f64,
    pub mapping: MappingName,
    /// Decay for the exponential mapping, in (0, 1).
    pub edn_gamma: f64,
    pub aux_kind: AuxKind,
    /// Restrict pointwise judging to verifier-passed rollouts.
    pub pointwise_passed_only: bool,
    /// Score assigned to a rollout whose pointwise judgment could not be
    /// parsed after retries.
    pub pointwise_fallback: f64,
    pub step_split: StepSplit,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda: 1.0,
            eps_a: 1e-4,
            mapping: MappingName::Pcs,
            edn_gamma: 0.5,
            aux_kind: AuxKind::RankGroupwise,
            pointwise_passed_only: false,
            pointwise_fallback: 0.0,
            step_split: StepSplit::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(RewardError::InvalidLambda { lambda: self.lambda });
        }
        if !(self.eps_a > 0.0) || !self.eps_a.is_finite() {
            return Err(RewardError::InvalidEps { eps_a: self.eps_a });
        }
        self.mapping_kind().map(|_| ())
    }

    /// The validated mapping (binds `edn_gamma` when the exponential mapping
    /// is selected).
    pub fn mapping_kind(&self) -> Result<MappingKind, RewardError> {
        match self.mapping {
            MappingName::Pcs => Ok(MappingKind::Pcs),
            MappingName::Edn => MappingKind::edn(self.edn_gamma),
            MappingName::Trs => Ok(MappingKind::Trs),
            MappingName::Irn => Ok(MappingKind::Irn),
        }
    }
}

/// Per-rollout reward decomposition handed to the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub rollout_id: u32,
    /// Verification reward, 0 or 1.
    pub r_ver: u8,
    pub r_aux: f64,
    pub aux_kind: AuxKind,
    pub r_total: f64,
    pub advantage: f64,
}

/// Judge outputs for one group, shaped per auxiliary kind. `None` entries
/// mark rollouts (or the whole ranking) where judging failed after retries;
/// they fall back to the configured scores and the caller records a flag.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupVerdicts {
    /// Per-rollout step tokens, in group order.
    Prm(Vec<Option<Vec<bool>>>),
    /// Per-rollout scalar scores, in group order.
    Pointwise(Vec<Option<f64>>),
    /// One ranking over the verifier-passed set, or `None` when fewer than
    /// two rollouts passed or the ranking was unusable.
    Groupwise(Option<TierRanking>),
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("ranking has no tiers")]
    EmptyRanking,
    #[error("ranking contains an empty tier")]
    EmptyTier,
    #[error("rollout {rollout_id} appears twice in the ranking")]
    DuplicateInRanking { rollout_id: u32 },
    #[error("EDN decay must lie strictly inside (0, 1), got {decay}")]
    InvalidDecay { decay: f64 },
    #[error("lambda must be finite and >= 0, got {lambda}")]
    InvalidLambda { lambda: f64 },
    #[error("eps_a must be finite and > 0, got {eps_a}")]
    InvalidEps { eps_a: f64 },
    #[error("step score list is empty")]
    EmptyStepScores,
    #[error("raw scores need at least two ranked rollouts, got {count}")]
    TooFewRanked { count: usize },
    #[error("raw score map does not cover exactly the passed set")]
    RawScoreDomainMismatch,
    #[error("non-finite value in reward combination: r_aux={r_aux}, lambda={lambda}")]
    NonFiniteInput { r_aux: f64, lambda: f64 },
    #[error("verifier outcome missing on rollout {rollout_id}")]
    VerifierPassMissing { rollout_id: u32 },
    #[error("verdicts cover {got} rollouts but the group has {expected}")]
    VerdictLengthMismatch { got: usize, expected: usize },
    #[error("verdict shape does not match aux kind {expected}")]
    VerdictKindMismatch { expected: AuxKind },
    #[error("ranking covers a different set than the verifier-passed rollouts")]
    RankingSetMismatch,
}

/// Mean of binary step scores; the rollout-level process reward.
/// An empty list is a data fault, not a zero reward.
pub fn prm_aggregate(step_scores: &[bool]) -> Result<f64, RewardError> {
    if step_scores.is_empty() {
        return Err(RewardError::EmptyStepScores);
    }
    let sum: f64 = step_scores.iter().map(|&s| if s { 1.0 } else { 0.0 }).sum();
    Ok(sum / step_scores.len() as f64)
}

/// Raw scores in `[0, 1]` for every ranked rollout under `mapping`.
/// Requires at least two ranked rollouts; the caller handles smaller sets.
pub fn raw_scores(
    ranking: &TierRanking,
    mapping: &MappingKind,
) -> Result<BTreeMap<u32, f64>, RewardError> {
    mapping.validate()?;
    let k = ranking.passed_count();
    if k < 2 {
        return Err(RewardError::TooFewRanked { count: k });
    }
    let tiers = ranking.tiers();
    let m = tiers.len();
    let mut out = BTreeMap::new();

    match mapping {
        MappingKind::Pcs => {
            // one point per strictly lower-ranked rollout, half per tie,
            // normalized by the K-1 available comparisons
            let mut below: usize = k;
            for tier in tiers {
                below -= tier.len();
                let ties = tier.len() - 1;
                let score = (below as f64 + ties as f64 / 2.0) / (k as f64 - 1.0);
                for &id in tier {
                    out.insert(id, score);
                }
            }
        }
        MappingKind::Edn { decay } => {
            let per_tier: Vec<f64> = (0..m).map(|t| decay.powi(t as i32)).collect();
            assign_min_maxed(&mut out, tiers, &per_tier);
        }
        MappingKind::Trs => {
            for (t, tier) in tiers.iter().enumerate() {
                let score = if m == 1 {
                    0.5
                } else {
                    (m - 1 - t) as f64 / (m as f64 - 1.0)
                };
                for &id in tier {
                    out.insert(id, score);
                }
            }
        }
        MappingKind::Irn => {
            let per_tier: Vec<f64> = (0..m).map(|t| 1.0 / (t as f64 + 1.0)).collect();
            assign_min_maxed(&mut out, tiers, &per_tier);
        }
    }
    Ok(out)
}

/// Min-max normalizes per-tier scores over the tiers of one prompt, then
/// assigns them. A single tier degenerates to 0.5 everywhere.
fn assign_min_maxed(out: &mut BTreeMap<u32, f64>, tiers: &[Vec<u32>], per_tier: &[f64]) {
    let max = per_tier.first().copied().unwrap_or(0.5);
    let min = per_tier.last().copied().unwrap_or(0.5);
    for (tier, &value) in tiers.iter().zip(per_tier) {
        let score = if tiers.len() == 1 { 0.5 } else { (value - min) / (max - min) };
        for &id in tier {
            out.insert(id, score);
        }
    }
}

/// Centers raw scores to zero mean within the passed set. With fewer than
/// two passed rollouts every reward is zero; rollouts outside the passed set
/// are implicitly zero and not returned.
pub fn center_rewards(
    raw: &BTreeMap<u32, f64>,
    passed_set: &BTreeSet<u32>,
) -> Result<BTreeMap<u32, f64>, RewardError> {
    if raw.len() != passed_set.len() || !raw.keys().all(|id| passed_set.contains(id)) {
        return Err(RewardError::RawScoreDomainMismatch);
    }
    if passed_set.len() < 2 {
        return Ok(passed_set.iter().map(|&id| (id, 0.0)).collect());
    }
    let mean: f64 = raw.values().sum::<f64>() / raw.len() as f64;
    Ok(raw.iter().map(|(&id, &s)| (id, s - mean)).collect())
}

/// Total rollout reward: verification plus weighted auxiliary signal.
pub fn combine_reward(r_ver: u8, r_aux: f64, lambda: f64) -> Result<f64, RewardError> {
    if !r_aux.is_finite() || !lambda.is_finite() {
        return Err(RewardError::NonFiniteInput { r_aux, lambda });
    }
    Ok(f64::from(r_ver) + lambda * r_aux)
}

/// Standardizes total rewards within the group:
/// `A_i = (R_i - mean) / (population_std + eps_a)`.
pub fn grpo_advantages(totals: &[f64], eps_a: f64) -> Vec<f64> {
    let n = totals.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = totals.iter().sum::<f64>() / n as f64;
    let mut devs: Vec<f64> = totals.iter().map(|r| r - mean).collect();
    // remove the first pass's rounding residue so outputs sum to zero at
    // machine precision even when eps_a dominates the denominator
    let residue = devs.iter().sum::<f64>() / n as f64;
    for d in &mut devs {
        *d -= residue;
    }
    let variance = devs.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let denom = variance.sqrt() + eps_a;
    devs.iter().map(|d| d / denom).collect()
}

/// Full per-rollout breakdown for one group: auxiliary rewards per the
/// configured kind, combined totals, and standardized advantages.
///
/// Verifier-failed rollouts never receive a ranking reward; in pointwise
/// mode they are scored unless `pointwise_passed_only` is set.
pub fn score_group(
    group: &RolloutGroup,
    verdicts: &GroupVerdicts,
    config: &RewardConfig,
) -> Result<Vec<RewardBreakdown>, RewardError> {
    config.validate()?;
    let n = group.rollouts.len();
    let mut passes = Vec::with_capacity(n);
    for r in &group.rollouts {
        let pass = r.verifier_pass.ok_or(RewardError::VerifierPassMissing {
            rollout_id: r.rollout_id,
        })?;
        passes.push(pass);
    }

    let aux: Vec<f64> = match (config.aux_kind, verdicts) {
        (AuxKind::Prm, GroupVerdicts::Prm(steps)) => {
            if steps.len() != n {
                return Err(RewardError::VerdictLengthMismatch { got: steps.len(), expected: n });
            }
            steps
                .iter()
                .map(|s| match s {
                    Some(tokens) => prm_aggregate(tokens),
                    None => Ok(0.0),
                })
                .collect::<Result<_, _>>()?
        }
        (AuxKind::GrPointwise, GroupVerdicts::Pointwise(scores)) => {
            if scores.len() != n {
                return Err(RewardError::VerdictLengthMismatch { got: scores.len(), expected: n });
            }
            scores
                .iter()
                .zip(&passes)
                .map(|(s, &pass)| {
                    if config.pointwise_passed_only && !pass {
                        0.0
                    } else {
                        s.unwrap_or(config.pointwise_fallback)
                    }
                })
                .collect()
        }
        (AuxKind::RankGroupwise, GroupVerdicts::Groupwise(ranking)) => {
            rank_rewards(group, &passes, ranking.as_ref(), &config.mapping_kind()?)?
        }
        (expected, _) => return Err(RewardError::VerdictKindMismatch { expected }),
    };

    let mut totals = Vec::with_capacity(n);
    let mut breakdowns = Vec::with_capacity(n);
    for ((r, &pass), &r_aux) in group.rollouts.iter().zip(&passes).zip(&aux) {
        let r_ver = u8::from(pass);
        let r_total = combine_reward(r_ver, r_aux, config.lambda)?;
        totals.push(r_total);
        breakdowns.push(RewardBreakdown {
            rollout_id: r.rollout_id,
            r_ver,
            r_aux,
            aux_kind: config.aux_kind,
            r_total,
            advantage: 0.0,
        });
    }
    for (b, adv) in breakdowns.iter_mut().zip(grpo_advantages(&totals, config.eps_a)) {
        b.advantage = adv;
    }
    Ok(breakdowns)
}

/// Centered ranking rewards in group order; zeros for verifier-failed
/// rollouts, for groups with fewer than two passed rollouts, and when no
/// usable ranking exists.
fn rank_rewards(
    group: &RolloutGroup,
    passes: &[bool],
    ranking: Option<&TierRanking>,
    mapping: &MappingKind,
) -> Result<Vec<f64>, RewardError> {
    let passed_set: BTreeSet<u32> = group
        .rollouts
        .iter()
        .zip(passes)
        .filter(|(_, &p)| p)
        .map(|(r, _)| r.rollout_id)
        .collect();
    let centered = match ranking {
        Some(ranking) if passed_set.len() >= 2 => {
            if ranking.passed_set() != passed_set {
                return Err(RewardError::RankingSetMismatch);
            }
            let raw = raw_scores(ranking, mapping)?;
            center_rewards(&raw, &passed_set)?
        }
        Some(ranking) => {
            if ranking.passed_set() != passed_set {
                return Err(RewardError::RankingSetMismatch);
            }
            passed_set.iter().map(|&id| (id, 0.0)).collect()
        }
        None => BTreeMap::new(),
    };
    Ok(group
        .rollouts
        .iter()
        .map(|r| centered.get(&r.rollout_id).copied().unwrap_or(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::{PromptRecord, Rollout};

    fn ranking(tiers: &[&[u32]]) -> TierRanking {
        TierRanking::new(tiers.iter().map(|t| t.to_vec()).collect()).unwrap()
    }

    fn group_n(n: u32, passes: &[bool]) -> RolloutGroup {
        let prompt = PromptRecord {
            prompt_id: "p".into(),
            question: "q".into(),
            image_ref: None,
            reference_answer: "1".into(),
            options: None,
        };
        let rollouts = (1..=n)
            .map(|i| {
                Rollout::from_raw(i, format!("<think>r{i}</think>\\boxed{{1}}"))
                    .with_verifier_pass(passes[(i - 1) as usize])
            })
            .collect();
        RolloutGroup::new(prompt, rollouts).unwrap()
    }

    #[test]
    fn prm_mean_and_empty() {
        assert_eq!(prm_aggregate(&[true, true, false]).unwrap(), 2.0 / 3.0);
        assert_eq!(prm_aggregate(&[true; 4]).unwrap(), 1.0);
        assert_eq!(prm_aggregate(&[]), Err(RewardError::EmptyStepScores));
    }

    #[test]
    fn pcs_matches_worked_example() {
        let r = ranking(&[&[1], &[2, 3], &[4]]);
        let raw = raw_scores(&r, &MappingKind::Pcs).unwrap();
        assert_eq!(raw[&1], 1.0);
        assert_eq!(raw[&2], 0.5);
        assert_eq!(raw[&3], 0.5);
        assert_eq!(raw[&4], 0.0);
    }

    #[test]
    fn alternative_mappings_three_singletons() {
        let r = ranking(&[&[1], &[2], &[3]]);
        let trs = raw_scores(&r, &MappingKind::Trs).unwrap();
        assert_eq!((trs[&1], trs[&2], trs[&3]), (1.0, 0.5, 0.0));
        let irn = raw_scores(&r, &MappingKind::Irn).unwrap();
        assert_eq!((irn[&1], irn[&2], irn[&3]), (1.0, 0.25, 0.0));
        let edn = raw_scores(&r, &MappingKind::edn(0.5).unwrap()).unwrap();
        assert_eq!(edn[&1], 1.0);
        assert!((edn[&2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(edn[&3], 0.0);
    }

    #[test]
    fn all_tie_gives_half_everywhere() {
        let r = ranking(&[&[1, 2, 3]]);
        for mapping in [
            MappingKind::Pcs,
            MappingKind::edn(0.5).unwrap(),
            MappingKind::Trs,
            MappingKind::Irn,
        ] {
            let raw = raw_scores(&r, &mapping).unwrap();
            assert!(raw.values().all(|&v| v == 0.5), "{mapping:?}");
        }
    }

    #[test]
    fn raw_scores_rejects_single_rollout() {
        let r = ranking(&[&[1]]);
        assert_eq!(
            raw_scores(&r, &MappingKind::Pcs),
            Err(RewardError::TooFewRanked { count: 1 })
        );
    }

    #[test]
    fn centering_examples() {
        let raw: BTreeMap<u32, f64> =
            [(1, 1.0), (2, 0.5), (3, 0.5), (4, 0.0)].into_iter().collect();
        let passed: BTreeSet<u32> = [1, 2, 3, 4].into_iter().collect();
        let centered = center_rewards(&raw, &passed).unwrap();
        assert_eq!(centered[&1], 0.5);
        assert_eq!(centered[&2], 0.0);
        assert_eq!(centered[&3], 0.0);
        assert_eq!(centered[&4], -0.5);

        let single: BTreeMap<u32, f64> = [(7, 0.9)].into_iter().collect();
        let centered = center_rewards(&single, &[7].into_iter().collect()).unwrap();
        assert_eq!(centered[&7], 0.0);

        let tie = raw_scores(&ranking(&[&[1, 2, 3]]), &MappingKind::Pcs).unwrap();
        let centered = center_rewards(&tie, &[1, 2, 3].into_iter().collect()).unwrap();
        assert!(centered.values().all(|&v| v == 0.0));
    }

    #[test]
    fn combine_basic() {
        assert_eq!(combine_reward(1, 0.5, 1.0).unwrap(), 1.5);
        assert_eq!(combine_reward(0, 42.0, 0.0).unwrap(), 0.0);
        assert_eq!(combine_reward(1, -0.5, 1.0).unwrap(), 0.5);
        assert!(combine_reward(1, f64::NAN, 1.0).is_err());
        assert!(combine_reward(1, 0.5, f64::INFINITY).is_err());
    }

    #[test]
    fn advantages_hand_cases() {
        assert_eq!(grpo_advantages(&[2.0, 2.0, 2.0], 1e-4), vec![0.0, 0.0, 0.0]);
        assert_eq!(grpo_advantages(&[1.0], 1e-4), vec![0.0]);
        let a = grpo_advantages(&[1.0, 1.0, 0.0, 0.0], 1e-4);
        let expect = 0.5 / (0.5 + 1e-4);
        for (got, want) in a.iter().zip([expect, expect, -expect, -expect]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn score_group_rank_mode_worked_example() {
        let group = group_n(4, &[true; 4]);
        let verdicts = GroupVerdicts::Groupwise(Some(ranking(&[&[1], &[2, 3], &[4]])));
        let config = RewardConfig::default();
        let b = score_group(&group, &verdicts, &config).unwrap();
        let totals: Vec<f64> = b.iter().map(|x| x.r_total).collect();
        assert_eq!(totals, vec![1.5, 1.0, 1.0, 0.5]);
        assert!(b.iter().all(|x| x.aux_kind == AuxKind::RankGroupwise));
    }

    #[test]
    fn score_group_all_failed_rank_mode() {
        let group = group_n(3, &[false; 3]);
        let b = score_group(
            &group,
            &GroupVerdicts::Groupwise(None),
            &RewardConfig::default(),
        )
        .unwrap();
        assert!(b.iter().all(|x| x.r_total == 0.0 && x.r_aux == 0.0 && x.r_ver == 0));
    }

    #[test]
    fn score_group_pointwise() {
        let group = group_n(2, &[true, false]);
        let config = RewardConfig { aux_kind: AuxKind::GrPointwise, ..Default::default() };
        let b = score_group(
            &group,
            &GroupVerdicts::Pointwise(vec![Some(0.8), Some(0.2)]),
            &config,
        )
        .unwrap();
        let totals: Vec<f64> = b.iter().map(|x| x.r_total).collect();
        assert_eq!(totals, vec![1.8, 0.2]);

        let restricted =
            RewardConfig { pointwise_passed_only: true, ..config };
        let b = score_group(
            &group,
            &GroupVerdicts::Pointwise(vec![Some(0.8), Some(0.2)]),
            &restricted,
        )
        .unwrap();
        assert_eq!(b[1].r_aux, 0.0);
    }

    #[test]
    fn score_group_prm_fallback_and_error() {
        let group = group_n(2, &[true, true]);
        let config = RewardConfig { aux_kind: AuxKind::Prm, ..Default::default() };
        let b = score_group(
            &group,
            &GroupVerdicts::Prm(vec![Some(vec![true, false]), None]),
            &config,
        )
        .unwrap();
        assert_eq!(b[0].r_aux, 0.5);
        assert_eq!(b[1].r_aux, 0.0);

        let err = score_group(
            &group,
            &GroupVerdicts::Prm(vec![Some(vec![]), Some(vec![true])]),
            &config,
        )
        .unwrap_err();
        assert_eq!(err, RewardError::EmptyStepScores);
    }

    #[test]
    fn score_group_rejects_mismatches() {
        let group = group_n(2, &[true, true]);
        let config = RewardConfig::default();
        assert_eq!(
            score_group(&group, &GroupVerdicts::Pointwise(vec![Some(0.5), Some(0.5)]), &config),
            Err(RewardError::VerdictKindMismatch { expected: AuxKind::RankGroupwise })
        );
        // ranking over the wrong id set
        assert_eq!(
            score_group(
                &group,
                &GroupVerdicts::Groupwise(Some(ranking(&[&[1], &[9]]))),
                &config
            ),
            Err(RewardError::RankingSetMismatch)
        );
    }

    #[test]
    fn tier_ranking_validation() {
        assert_eq!(TierRanking::new(vec![]), Err(RewardError::EmptyRanking));
        assert_eq!(TierRanking::new(vec![vec![1], vec![]]), Err(RewardError::EmptyTier));
        assert_eq!(
            TierRanking::new(vec![vec![1], vec![1]]),
            Err(RewardError::DuplicateInRanking { rollout_id: 1 })
        );
        assert!(MappingKind::edn(1.0).is_err());
        assert!(MappingKind::edn(0.0).is_err());
    }
}
