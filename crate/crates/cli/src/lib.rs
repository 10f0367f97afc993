//! Library side of the `roadrl` command-line tool. Every subcommand is a
//! plain function so it can be driven from tests as well as from `main`.

pub mod commands;
pub mod config;
pub mod error;
pub mod render;
pub mod trajectory;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roadrl::scenario::Template;

pub use commands::{cmd_analyze, cmd_eval, cmd_finetune, cmd_gen, cmd_rollout, cmd_train};
pub use config::RunConfig;
pub use error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "roadrl", version, about = "Multi-agent driving simulator with self-play PPO")]
pub struct Cli {
    /// Worker threads for scene-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate procedural scenarios as scenario_%05d.json files.
    Gen(GenArgs),
    /// Train a policy from a run config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a scenario set.
    Eval(EvalArgs),
    /// Roll out one scenario and dump a trajectory CSV and/or SVG frames.
    Rollout(RolloutArgs),
    /// Continue training a checkpoint on another scenario set.
    Finetune(FinetuneArgs),
    /// OOD maneuver counts and error distributions from trajectory dumps.
    Analyze(AnalyzeArgs),
}

fn parse_template(s: &str) -> Result<Template, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown template `{s}` (straight_road, curve, intersection, merge)"))
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Template; repeat to cycle through several.
    #[arg(long, value_parser = parse_template)]
    pub template: Vec<Template>,
    /// TOML file with generator parameters.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Run config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from this checkpoint's weights and step counter.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// No per-update progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scenario file or directory.
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Take the most likely action instead of sampling.
    #[arg(long, conflicts_with = "sample")]
    pub deterministic: bool,
    /// Sample actions (the default).
    #[arg(long)]
    pub sample: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run config supplying env settings; defaults plus the checkpoint's
    /// observation settings otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Evaluate on copies with every goal reflected behind its agent.
    #[arg(long)]
    pub alter_goals_behind: bool,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderKind {
    Svg,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// A single scenario file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Outputs to write; repeat for both.
    #[arg(long, value_enum, default_values_t = [RenderKind::Csv])]
    pub render: Vec<RenderKind>,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alter_goals_behind: bool,
    #[arg(long, default_value = "rollout")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scenario file or directory; the config's dataset otherwise.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub alter_goals_behind: bool,
    /// Output checkpoint (default: <output_dir>/finetuned.ckpt).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Trajectory CSV files or directories containing them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Eval(a) => cmd_eval(&a).map(|_| ()),
        Command::Rollout(a) => cmd_rollout(&a).map(|_| ()),
        Command::Finetune(a) => cmd_finetune(&a).map(|_| ()),
        Command::Analyze(a) => cmd_analyze(&a).map(|_| ()),
    }
}
