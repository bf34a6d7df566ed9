//! `mmhawkes` command-line tool. Exit codes: 0 success, 1 invalid input
//! or usage, 2 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "mmhawkes", version, about = "Rumor veracity from retweet cascades with a mixture of marked Hawkes processes")]
pub struct Cli {
    /// TOML file with defaults for every option.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a cascade file and summarize it.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Fit both mixture components to labeled cascades.
    Fit(FitArgs),
    /// Score cascades with a fitted model.
    Score(ScoreArgs),
    /// Classification metrics on labeled cascades.
    Eval(EvalArgs),
    /// Simulate labeled cascades.
    Simulate(SimulateArgs),
    /// Goodness-of-fit tests by super thinning.
    Gof(GofArgs),
    /// Early-detection AUC over truncations.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Mcmc,
    Map,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub min_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Score only the first hours of each cascade.
    #[arg(long, conflicts_with = "truncate_count")]
    pub truncate_time: Option<f64>,
    /// Score only the first retweets of each cascade.
    #[arg(long)]
    pub truncate_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also fit the feature-based logistic baseline on these cascades.
    #[arg(long)]
    pub baseline_train: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Fitted model whose MAP components are simulated.
    #[arg(long, required_unless_present = "processes", conflicts_with = "processes")]
    pub model: Option<PathBuf>,
    /// JSON object with `false` and `true` process definitions.
    #[arg(long)]
    pub processes: Option<PathBuf>,
    /// Cascades per class.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub max_events: Option<usize>,
    /// Bootstrap covariates from these cascades instead of the synthetic generator.
    #[arg(long)]
    pub covariates_from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GofArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    /// Also run a posterior predictive check with this many simulations.
    #[arg(long)]
    pub ppc: Option<usize>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, required_unless_present = "refit")]
    pub model: Option<PathBuf>,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Comma-separated observation windows in hours.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Comma-separated retweet counts.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Retrain on truncated training cascades for every cell.
    #[arg(long, requires = "train")]
    pub refit: bool,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e
                .downcast_ref::<mmhawkes::Error>()
                .is_some_and(mmhawkes::Error::is_validation);
            ExitCode::from(if invalid { 1 } else { 2 })
        }
    }
}
