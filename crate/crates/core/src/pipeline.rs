//! Group scoring pipeline: verify every rollout, collect the configured
//! judge verdicts through the gateway, then produce reward breakdowns.
//!
//! Judge failures after retries never abort a group. The affected rewards
//! fall back to their configured zero/fallback values and the group carries
//! flags describing what happened, so batch callers keep going and service
//! callers can map failure classes to status codes.

use futures::stream::{self, StreamExt};
use serde::Serialize;
use thiserror::Error;

use crate::jsonl::GroupRewards;
use crate::judge::prompts::{
    compose_response, render_groupwise_prompt, render_pointwise_prompt, render_prm_turns,
    split_steps, PromptError,
};
use crate::judge::{ChatMessage, GatewayError, JudgeGateway};
use crate::reward::{
    score_group, AuxKind, GroupVerdicts, RewardConfig, RewardError, TierRanking,
};
use crate::rollout::{Rollout, RolloutGroup};
use crate::verifier::{verify, VerifierConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub verifier: VerifierConfig,
    pub reward: RewardConfig,
}

/// Failure class of an exhausted judge interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeFailureKind {
    Timeout,
    Transport,
    Parse,
}

impl From<&GatewayError> for JudgeFailureKind {
    fn from(e: &GatewayError) -> Self {
        match e {
            GatewayError::Timeout { .. } => JudgeFailureKind::Timeout,
            GatewayError::Transport { .. } => JudgeFailureKind::Transport,
            GatewayError::Parse { .. } => JudgeFailureKind::Parse,
        }
    }
}

/// Per-group audit flags surfaced alongside the breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "flag")]
pub enum GroupFlag {
    /// The groupwise ranking was unusable; rank rewards were zeroed.
    RankingUnavailable { kind: JudgeFailureKind, detail: String },
    /// A pointwise judgment was unusable; the fallback score was used.
    PointwiseFallback { rollout_id: u32, kind: JudgeFailureKind, detail: String },
    /// A pointwise score landed outside [0, 1] and was clamped.
    ScoreClamped { rollout_id: u32 },
    /// A step judgment was unusable; the rollout's process reward is zero.
    PrmFallback { rollout_id: u32, kind: JudgeFailureKind, detail: String },
    /// The trajectory produced no steps; the rollout's process reward is zero.
    PrmNoSteps { rollout_id: u32 },
}

/// One fully scored group.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredGroup {
    pub prompt_id: String,
    pub breakdowns: Vec<crate::reward::RewardBreakdown>,
    /// The tie-aware ranking used (groupwise mode with a usable ranking).
    pub ranking: Option<TierRanking>,
    /// Transcript log ids of the successful judge interactions.
    pub transcript_ids: Vec<usize>,
    pub flags: Vec<GroupFlag>,
}

impl ScoredGroup {
    pub fn group_rewards(&self) -> GroupRewards {
        GroupRewards { prompt_id: self.prompt_id.clone(), rewards: self.breakdowns.clone() }
    }

    /// Worst judge failure among the flags: transport-class failures
    /// dominate parse failures.
    pub fn judge_failure(&self) -> Option<JudgeFailureKind> {
        let mut worst = None;
        for flag in &self.flags {
            let kind = match flag {
                GroupFlag::RankingUnavailable { kind, .. }
                | GroupFlag::PointwiseFallback { kind, .. }
                | GroupFlag::PrmFallback { kind, .. } => *kind,
                _ => continue,
            };
            worst = Some(match (worst, kind) {
                (Some(JudgeFailureKind::Timeout), _) | (_, JudgeFailureKind::Timeout) => {
                    JudgeFailureKind::Timeout
                }
                (Some(JudgeFailureKind::Transport), _) | (_, JudgeFailureKind::Transport) => {
                    JudgeFailureKind::Transport
                }
                _ => JudgeFailureKind::Parse,
            });
        }
        worst
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Runs the verifier over every rollout, returning a group with
/// `verifier_pass` filled.
pub fn verify_group(group: &RolloutGroup, config: &VerifierConfig) -> RolloutGroup {
    let rollouts: Vec<Rollout> = group
        .rollouts
        .iter()
        .map(|r| {
            let pass = verify(
                r.boxed_answer.as_deref(),
                &group.prompt.reference_answer,
                group.prompt.options.as_deref(),
                config,
            );
            r.clone().with_verifier_pass(pass)
        })
        .collect();
    RolloutGroup { prompt: group.prompt.clone(), rollouts }
}

/// Scores one group end to end. No groupwise judge call is issued when
/// fewer than two rollouts pass verification.
pub async fn score_group_with_judge(
    group: &RolloutGroup,
    gateway: &JudgeGateway,
    config: &PipelineConfig,
) -> Result<ScoredGroup, PipelineError> {
    config.reward.validate()?;
    let group = verify_group(group, &config.verifier);
    let mut flags = Vec::new();
    let mut transcript_ids = Vec::new();

    let (verdicts, ranking) = match config.reward.aux_kind {
        AuxKind::RankGroupwise => {
            let (verdict, ranking) =
                groupwise_verdict(&group, gateway, &mut flags, &mut transcript_ids).await?;
            (verdict, ranking)
        }
        AuxKind::GrPointwise => (
            pointwise_verdicts(&group, gateway, config, &mut flags, &mut transcript_ids).await,
            None,
        ),
        AuxKind::Prm => (
            prm_verdicts(&group, gateway, config, &mut flags, &mut transcript_ids).await,
            None,
        ),
    };

    let breakdowns = score_group(&group, &verdicts, &config.reward)?;
    Ok(ScoredGroup {
        prompt_id: group.prompt.prompt_id.clone(),
        breakdowns,
        ranking,
        transcript_ids,
        flags,
    })
}

async fn groupwise_verdict(
    group: &RolloutGroup,
    gateway: &JudgeGateway,
    flags: &mut Vec<GroupFlag>,
    transcript_ids: &mut Vec<usize>,
) -> Result<(GroupVerdicts, Option<TierRanking>), PipelineError> {
    let candidates: Vec<(u32, String)> = group
        .rollouts
        .iter()
        .filter(|r| r.verifier_pass == Some(true))
        .map(|r| (r.rollout_id, compose_response(&r.trajectory, r.boxed_answer.as_deref())))
        .collect();
    if candidates.len() < 2 {
        return Ok((GroupVerdicts::Groupwise(None), None));
    }
    let prompt = render_groupwise_prompt(
        &group.prompt.question,
        &group.prompt.reference_answer,
        &candidates,
    )?;
    match gateway
        .groupwise(vec![ChatMessage::user(prompt.text)], candidates.len(), &prompt.order)
        .await
    {
        Ok((ranking, id)) => {
            transcript_ids.push(id);
            Ok((GroupVerdicts::Groupwise(Some(ranking.clone())), Some(ranking)))
        }
        Err(e) => {
            flags.push(GroupFlag::RankingUnavailable {
                kind: (&e).into(),
                detail: e.to_string(),
            });
            Ok((GroupVerdicts::Groupwise(None), None))
        }
    }
}

async fn pointwise_verdicts(
    group: &RolloutGroup,
    gateway: &JudgeGateway,
    config: &PipelineConfig,
    flags: &mut Vec<GroupFlag>,
    transcript_ids: &mut Vec<usize>,
) -> GroupVerdicts {
    let concurrency = gateway.config().max_concurrent_requests.max(1);
    let prompts: Vec<Option<String>> = group
        .rollouts
        .iter()
        .map(|r| {
            if config.reward.pointwise_passed_only && r.verifier_pass != Some(true) {
                return None;
            }
            Some(render_pointwise_prompt(
                &group.prompt.question,
                &r.trajectory,
                r.boxed_answer.as_deref(),
            ))
        })
        .collect();
    let outcomes: Vec<Option<Result<_, _>>> = stream::iter(prompts)
        .map(|text| async {
            match text {
                None => None,
                Some(text) => Some(gateway.pointwise(vec![ChatMessage::user(text)]).await),
            }
        })
        .buffered(concurrency)
        .collect()
        .await;

    let mut scores = Vec::with_capacity(group.rollouts.len());
    for (r, outcome) in group.rollouts.iter().zip(outcomes) {
        match outcome {
            None => scores.push(None),
            Some(Ok((verdict, id))) => {
                transcript_ids.push(id);
                if verdict.clamped {
                    flags.push(GroupFlag::ScoreClamped { rollout_id: r.rollout_id });
                }
                scores.push(Some(verdict.score));
            }
            Some(Err(e)) => {
                flags.push(GroupFlag::PointwiseFallback {
                    rollout_id: r.rollout_id,
                    kind: (&e).into(),
                    detail: e.to_string(),
                });
                scores.push(None);
            }
        }
    }
    GroupVerdicts::Pointwise(scores)
}

async fn prm_verdicts(
    group: &RolloutGroup,
    gateway: &JudgeGateway,
    config: &PipelineConfig,
    flags: &mut Vec<GroupFlag>,
    transcript_ids: &mut Vec<usize>,
) -> GroupVerdicts {
    let concurrency = gateway.config().max_concurrent_requests.max(1);
    let step_lists: Vec<Vec<String>> = group
        .rollouts
        .iter()
        .map(|r| split_steps(&r.trajectory, config.reward.step_split))
        .collect();
    let question = group.prompt.question.as_str();
    let outcomes: Vec<Result<Option<(Vec<bool>, Vec<usize>)>, GatewayError>> =
        stream::iter(step_lists)
            .map(|steps| async move {
                if steps.is_empty() {
                    return Ok(None);
                }
                let mut tokens = Vec::with_capacity(steps.len());
                let mut ids = Vec::with_capacity(steps.len());
                for t in 1..=steps.len() {
                    let messages = render_prm_turns(question, &steps[..t]);
                    let (pass, id) = gateway.prm_step(messages).await?;
                    tokens.push(pass);
                    ids.push(id);
                }
                Ok(Some((tokens, ids)))
            })
            .buffered(concurrency)
            .collect()
            .await;

    let mut verdicts = Vec::with_capacity(group.rollouts.len());
    for (r, outcome) in group.rollouts.iter().zip(outcomes) {
        match outcome {
            Ok(Some((tokens, ids))) => {
                transcript_ids.extend(ids);
                verdicts.push(Some(tokens));
            }
            Ok(None) => {
                flags.push(GroupFlag::PrmNoSteps { rollout_id: r.rollout_id });
                verdicts.push(None);
            }
            Err(e) => {
                flags.push(GroupFlag::PrmFallback {
                    rollout_id: r.rollout_id,
                    kind: (&e).into(),
                    detail: e.to_string(),
                });
                verdicts.push(None);
            }
        }
    }
    GroupVerdicts::Prm(verdicts)
}
