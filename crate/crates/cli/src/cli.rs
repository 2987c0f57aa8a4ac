//! Command-line interface definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use groupward::reward::{AuxKind, MappingName};
use groupward::stability::Scheme;
use groupward::verifier::OptionLetterMode;

#[derive(Debug, Parser)]
#[command(
    name = "groupward",
    version,
    about = "Reward orchestration for RL post-training: verifier plus trajectory rewards, \
             consistency auditing, and judge-stability analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score rollout groups from JSONL and write reward JSONL.
    Score(ScoreArgs),
    /// Audit predictions for reasoning-answer consistency and compute metrics.
    Audit(AuditArgs),
    /// Run the judge-stability protocol and compare reward schemes.
    Stability(StabilityArgs),
    /// Serve the batch-scoring HTTP API.
    Serve(ServeArgs),
    /// Serve scripted judge replies for end-to-end tests.
    MockJudge(MockJudgeArgs),
}

#[derive(Debug, Args, Clone)]
pub struct CommonConfigArgs {
    /// TOML config file; flags override file and environment values.
    #[arg(long, global = false)]
    pub config: Option<PathBuf>,
    /// Judge endpoint base URL.
    #[arg(long)]
    pub judge_url: Option<String>,
    /// Judge model name.
    #[arg(long)]
    pub judge_model: Option<String>,
    /// Judge sampling temperature.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Extra judge attempts after the first failure.
    #[arg(long)]
    pub retry_budget: Option<u32>,
    /// Bound on in-flight judge requests.
    #[arg(long)]
    pub max_concurrent: Option<usize>,
    /// Relative tolerance for numeric answer equality.
    #[arg(long)]
    pub numeric_tolerance: Option<f64>,
    /// Strip trailing units when normalizing answers.
    #[arg(long)]
    pub strip_units: Option<bool>,
    /// Case-fold answers when normalizing.
    #[arg(long)]
    pub case_fold: Option<bool>,
    /// How option letters verify against contents.
    #[arg(long, value_enum)]
    pub option_letter_mode: Option<OptionLetterModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptionLetterModeArg {
    LetterOnly,
    ContentAllowed,
}

impl From<OptionLetterModeArg> for OptionLetterMode {
    fn from(v: OptionLetterModeArg) -> Self {
        match v {
            OptionLetterModeArg::LetterOnly => OptionLetterMode::LetterOnly,
            OptionLetterModeArg::ContentAllowed => OptionLetterMode::ContentAllowed,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AuxKindArg {
    Prm,
    GrPointwise,
    RankGroupwise,
}

impl From<AuxKindArg> for AuxKind {
    fn from(v: AuxKindArg) -> Self {
        match v {
            AuxKindArg::Prm => AuxKind::Prm,
            AuxKindArg::GrPointwise => AuxKind::GrPointwise,
            AuxKindArg::RankGroupwise => AuxKind::RankGroupwise,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MappingArg {
    Pcs,
    Edn,
    Trs,
    Irn,
}

impl From<MappingArg> for MappingName {
    fn from(v: MappingArg) -> Self {
        match v {
            MappingArg::Pcs => MappingName::Pcs,
            MappingArg::Edn => MappingName::Edn,
            MappingArg::Trs => MappingName::Trs,
            MappingArg::Irn => MappingName::Irn,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    GrPointwise,
    RankGroupwise,
}

impl From<SchemeArg> for Scheme {
    fn from(v: SchemeArg) -> Self {
        match v {
            SchemeArg::GrPointwise => Scheme::GrPointwise,
            SchemeArg::RankGroupwise => Scheme::RankGroupwise,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Rollout groups JSONL, one group per line.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Reward JSONL output path.
    #[arg(long = "out")]
    pub output: PathBuf,
    /// Auxiliary trajectory reward kind.
    #[arg(long, value_enum)]
    pub aux_kind: Option<AuxKindArg>,
    /// Rank-to-score mapping for groupwise mode.
    #[arg(long, value_enum)]
    pub mapping: Option<MappingArg>,
    /// Auxiliary reward weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Decay for the exponential mapping, in (0, 1).
    #[arg(long)]
    pub edn_gamma: Option<f64>,
    #[command(flatten)]
    pub common: CommonConfigArgs,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Predictions JSONL.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Metrics report JSON output path.
    #[arg(long)]
    pub report: PathBuf,
    /// Optional per-record verdict CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Per-step metric curve CSV path (default: <report>.curve.csv when
    /// predictions carry step tags).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonConfigArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum JudgeChoice {
    /// Seeded synthetic judge; deterministic and offline.
    Synthetic,
    /// The configured chat-completions endpoint.
    Endpoint,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, default_value_t = 500)]
    pub prompts: usize,
    #[arg(long, default_value_t = 8)]
    pub rollouts: usize,
    #[arg(long, default_value_t = 4)]
    pub repeats: usize,
    /// Schemes to compare (repeatable).
    #[arg(long = "scheme", value_enum)]
    pub schemes: Vec<SchemeArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = JudgeChoice::Synthetic)]
    pub judge: JudgeChoice,
    /// Pointwise score noise spread of the synthetic judge.
    #[arg(long, default_value_t = 0.15)]
    pub sigma_p: f64,
    /// Adjacent-tier swap probability of the synthetic judge.
    #[arg(long, default_value_t = 0.1)]
    pub p_swap: f64,
    /// Fixed rollout groups JSONL (endpoint runs); synthetic groups otherwise.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Report JSON output path.
    #[arg(long, default_value = "stability_report.json")]
    pub report: PathBuf,
    /// Tensor JSONL output path.
    #[arg(long, default_value = "stability_tensors.jsonl")]
    pub tensors: PathBuf,
    #[command(flatten)]
    pub common: CommonConfigArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address, host:port.
    #[arg(long)]
    pub listen: Option<String>,
    #[command(flatten)]
    pub common: CommonConfigArgs,
}

#[derive(Debug, Args)]
pub struct MockJudgeArgs {
    /// Judge script JSON file.
    #[arg(long)]
    pub script: PathBuf,
    /// Listen address, host:port (port 0 picks a free port).
    #[arg(long, default_value = "127.0.0.1:0")]
    pub listen: String,
}
