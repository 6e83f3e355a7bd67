//! `lambada`: prepare corpora, fit generators, augment training sets and run
//! evaluation grids from the command line.

mod commands;
mod config;
mod run_dir;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use crate::commands::{
    AugmentArgs, EvalArgs, GenerateArgs, PrepareArgs, ReportArgs, TrainClfArgs, TrainLmArgs,
};

/// Bad flags, bad config or missing inputs. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "lambada", version, about = "Language-model based data augmentation for text classifiers")]
pub struct Cli {
    /// TOML configuration file. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Parent directory of run directories.
    #[arg(long, global = true, env = "LAMBADA_RUN_DIR")]
    root: Option<PathBuf>,

    /// Run label; outputs go to `<root>/<label>`.
    #[arg(long, global = true)]
    run: Option<String>,

    /// Write outputs here instead of `<root>/<label>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replace existing output files.
    #[arg(long, global = true)]
    overwrite: bool,

    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a labeled corpus into train/validation/test files.
    Prepare(PrepareArgs),
    /// Fit the class-conditional n-gram model on a training set.
    TrainLm(TrainLmArgs),
    /// Sample labeled sentences from a saved n-gram model.
    Generate(GenerateArgs),
    /// Augment a training set with LAMBADA, EDA or weak labeling.
    Augment(AugmentArgs),
    /// Train a classifier and optionally score it on a test set.
    TrainClf(TrainClfArgs),
    /// Run an experiment grid and write results plus summaries.
    Eval(EvalArgs),
    /// Render a summary from a saved results file.
    Report(ReportArgs),
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => config::Config::load(p)?,
        None => config::Config::default(),
    };
    if let Some(jobs) = cli.jobs.or(cfg.run.jobs) {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        cfg.run.jobs = Some(jobs);
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let ctx = commands::Context::new(&cli, cfg);
    match cli.command {
        Command::Prepare(a) => commands::prepare(ctx, a),
        Command::TrainLm(a) => commands::train_lm(ctx, a),
        Command::Generate(a) => commands::generate(ctx, a),
        Command::Augment(a) => commands::augment(ctx, a),
        Command::TrainClf(a) => commands::train_clf(ctx, a),
        Command::Eval(a) => commands::eval(ctx, a),
        Command::Report(a) => commands::report(ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
