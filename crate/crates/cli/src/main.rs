mod commands;
mod exit;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Decision-point choice prediction for indoor wayfinding.
#[derive(Debug, Parser)]
#[command(name = "wayfind", version)]
pub struct Cli {
    /// Seed for every random stream; overrides seeds in parameter files.
    #[arg(long, global = true, env = "WAYFIND_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect a building network document.
    #[command(subcommand)]
    Net(NetCmd),
    /// Generate a synthetic building, participants and trajectories.
    Synth(SynthArgs),
    /// Map trajectories to decision-point sequences.
    Map(MapArgs),
    /// Turn sequences into a lagged, label-encoded dataset.
    Featurize(FeaturizeArgs),
    /// Train a random forest or logistic regression model.
    Train(TrainArgs),
    /// Evaluate a model on a dataset.
    Eval(EvalArgs),
    /// Run an experiment.
    #[command(subcommand)]
    Exp(ExpCmd),
}

#[derive(Debug, Subcommand)]
pub enum NetCmd {
    /// Check structure and numbering; prints violations.
    Validate { file: PathBuf },
    /// Node, link, exit and staircase counts as JSON.
    Stats { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON with building, tasks, policy and synth sections (all optional).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub agents: Option<usize>,
    /// Planar position noise in meters.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Transform set (JSON) or control points (CSV, transforms are estimated).
    #[arg(long)]
    pub transforms: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub snap_radius: f64,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub sequences: PathBuf,
    #[arg(long)]
    pub net: PathBuf,
    /// Attach the nine profile features from this file.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub lag: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Rf,
    Mlr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, Args, serde::Serialize)]
pub struct SplitArgs {
    /// Which part of the seeded train/test split to use.
    #[arg(long, value_enum, default_value_t = Part::All)]
    pub split: Part,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long)]
    pub data: PathBuf,
    /// Forest or logistic-regression parameters as JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    None,
    Task,
    Gender,
    Device,
    Familiarity,
    FamiliarityTask,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = GroupArg::None)]
    pub group_by: GroupArg,
    /// Profiles for grouping by participant attributes.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-node recall as tab-separated text.
    #[arg(long)]
    pub recall_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExpData {
    /// Dataset dump written by `featurize`.
    #[arg(long)]
    pub data: PathBuf,
    /// Forest, logistic-regression and split settings as JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Tab-separated rows; provenance goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: ExpData,
    #[arg(long)]
    pub param: String,
    #[arg(long, requires_all = ["to", "step"], conflicts_with = "values")]
    pub from: Option<usize>,
    #[arg(long)]
    pub to: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    /// Explicit grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
}

#[derive(Debug, Subcommand)]
pub enum ExpCmd {
    /// Random forest against logistic regression on one split.
    Compare(ExpData),
    /// One forest per task.
    PerTask(ExpData),
    /// Forest with and without profile features.
    Ablate(ExpData),
    /// Retrain across a parameter grid.
    Sweep(SweepArgs),
    /// Split counts and top-level features of a forest.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node usage and sequence lengths per task.
    Usage {
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind::*;
            if matches!(e.kind(), DisplayHelp | DisplayVersion | DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::from(if e.kind() == DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 });
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: input: {first}");
            return ExitCode::from(exit::INPUT as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: runtime: {e}");
            return ExitCode::from(exit::RUNTIME as u8);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", exit::render(&e));
            ExitCode::from(exit::code(&e) as u8)
        }
    }
}
