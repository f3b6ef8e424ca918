//! `hoid`: prompts, simulated rollouts, reward scoring, advantages, SFT data
//! and mAP evaluation from the command line.
//!
//! Exit codes: 0 success, 1 validation failures (bad records, unknown image
//! ids, invalid config), 2 I/O or environment failures.

mod commands;
mod config;
mod jsonl;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Invalid(String),
    /// Output was written but some records failed validation.
    #[error("{0} record(s) failed validation")]
    RecordFailures(usize),
}

impl From<hoid_core::Error> for CliError {
    fn from(e: hoid_core::Error) -> Self {
        match e {
            hoid_core::Error::Io { .. } | hoid_core::Error::Http(_) => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Invalid(_) | CliError::RecordFailures(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum OutputFormat {
    #[default]
    Jsonl,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "hoid",
    version,
    about = "HOI detection as text: prompts, rewards, advantages, SFT data and mAP"
)]
pub struct Cli {
    /// TOML or JSON config file (sections: reward, grpo, eval, noise, template, endpoint, paths).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for simulated rollouts (overrides noise.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Label vocabulary JSON; defaults to the bundled HICO-DET vocabulary.
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct DatasetArg {
    /// Annotation file (falls back to paths.dataset in the config).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "canonical", value_parser = ["canonical", "hico-json", "hico_json"])]
    pub annotation_format: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Question prompts.
    #[command(subcommand)]
    Prompts(PromptsCmd),
    /// Rule-based rewards.
    #[command(subcommand)]
    Reward(RewardCmd),
    /// HICO-DET style evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Seeded noisy completions built from ground truth.
    Simulate(SimulateArgs),
    /// Group-relative policy optimization helpers.
    #[command(subcommand)]
    Grpo(GrpoCmd),
    /// Distillation data.
    #[command(subcommand)]
    Sft(SftCmd),
    /// Annotation import and statistics.
    #[command(subcommand)]
    Dataset(DatasetCmd),
}

#[derive(Debug, Subcommand)]
pub enum PromptsCmd {
    /// One `{image_id, prompt}` line per image.
    Build {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum RewardCmd {
    /// Score `{image_id, completion}` lines; one breakdown per line, input order.
    Score {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(long)]
        completions: PathBuf,
        /// Overrides, e.g. `w_tag=0.2,w_b=0.2,w_ko=0.2,w_kv=0.2,dedup_iou_threshold=0.5`.
        #[arg(long)]
        weights: Option<String>,
        /// Duplicate rule [assumed default: pair-both; either-box is the literal reading].
        #[arg(long)]
        dedup_mode: Option<String>,
        /// Include per-instance terms and the matching.
        #[arg(long)]
        detail: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// mAP over Default / Known Object x Full / Rare / Non-Rare.
    Map {
        #[command(flatten)]
        data: DatasetArg,
        /// `{image_id, completion}` lines; the first line per image is used.
        #[arg(long)]
        completions: PathBuf,
        /// Derive the rare split (< 10 instances) from this training file.
        #[arg(long, conflicts_with = "rare_list")]
        rare_from_train: Option<PathBuf>,
        /// JSON array of rare category ids. Without either option the
        /// published 138-category list is used.
        #[arg(long)]
        rare_list: Option<PathBuf>,
        /// Confidence synthesis [assumed default: output-order; text carries no scores].
        #[arg(long)]
        score_mode: Option<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    /// Single noise knob; see `NoiseProfile::at_level`. Overrides the config noise section.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Samples per image.
    #[arg(long, default_value_t = 1)]
    pub samples: u64,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GrpoCmd {
    /// `{group_id, rewards}` lines in, `{group_id, advantages}` lines out.
    Advantages {
        #[arg(long)]
        input: PathBuf,
        /// Reject groups of any other size (config grpo.group_size = 4 is not enforced unless given).
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SftCmd {
    /// Join traces with ground-truth answers into `{image_id, prompt, think, answer}` lines.
    Assemble {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(long)]
        traces: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Collect teacher reasoning from a chat-completions endpoint (config section `endpoint`;
    /// bearer token from the variable named by endpoint.token_env, default HOID_TRACE_API_KEY).
    FetchTraces {
        #[command(flatten)]
        data: DatasetArg,
        /// Appended to; images already present are skipped.
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    /// Convert annotations to the canonical dataset file.
    Import {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(long, default_value = "test", value_parser = ["train", "test"])]
        split: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Rare category ids (< 10 training instances) as a JSON array.
    Rare {
        #[command(flatten)]
        data: DatasetArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
