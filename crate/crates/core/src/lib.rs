//! Reward orchestration for RL post-training with verifiable rewards.
//!
//! The engine assigns per-rollout rewards by combining a rule-based answer
//! verifier with one of three trajectory-supervision signals:
//!
//! - step-level process-reward aggregation,
//! - pointwise generative judging (an LLM judge emits a rubric-grounded
//!   scalar score per rollout),
//! - groupwise ranking (the judge ranks all verifier-passed rollouts of a
//!   prompt into ordered tie-aware tiers, which are mapped to centered
//!   scalar rewards).
//!
//! On top of the per-rollout totals the engine emits group-standardized
//! advantages for an external trainer. Side modules provide a
//! reasoning-answer consistency auditor with evaluation metrics and a
//! judge-stability lab that measures reward variance under repeated judging.

pub mod consistency;
pub mod jsonl;
pub mod judge;
pub mod pipeline;
pub mod reward;
pub mod rollout;
pub mod stability;
pub mod verifier;

#[cfg(feature = "test-util")]
pub mod test_support;

pub use consistency::{ConsistencyVerdict, EvalRecord, MetricsSummary};
pub use reward::{AuxKind, MappingKind, RewardBreakdown, RewardConfig, TierRanking};
pub use rollout::{PromptRecord, Rollout, RolloutGroup};
pub use verifier::VerifierConfig;
