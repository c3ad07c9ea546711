//! `quadfuse`: one binary for dataset preparation, benchmark synthesis,
//! two-stage training, evaluation, ablation, uncertainty, the biosignal
//! baseline and plotting.

mod commands;
mod failure;
mod io;
mod plot;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use failure::{CliResult, EXIT_INPUT};
use settings::Settings;

#[derive(Parser)]
#[command(name = "quadfuse", version, about = "Quad-modal intent inference pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic streams, AV/TS pools, IMU windows and their taxonomy.
    Synth(Common),
    /// Stream files to the next-behaviour dataset.
    PrepareTs(Common),
    /// AV/TS pools to the MCQ benchmark and the conflict sets.
    PrepareBench(Common),
    /// Stage 1 (alignment) or stage 2 (specialization) training.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["1", "2"])]
        stage: String,
    },
    /// Greedy MCQ accuracy under one modality mask.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Modalities to keep, e.g. `V+A+TS` or `TS` (default all three).
        #[arg(long)]
        mask: Option<String>,
    },
    /// Accuracy under all seven modality masks.
    Ablate(Common),
    /// Predictive entropy on the congruent and conflict sets.
    Uq(Common),
    /// CNN-LSTM biosignal baseline.
    BaselineBio(Common),
    /// SVG charts and CSV tables from ablation and entropy results.
    Plot(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth(c)
            | Command::PrepareTs(c)
            | Command::PrepareBench(c)
            | Command::Ablate(c)
            | Command::Uq(c)
            | Command::BaselineBio(c)
            | Command::Plot(c) => c,
            Command::Train { common, .. } | Command::Eval { common, .. } => common,
        }
    }
}

fn init_logging(settings: &mut Settings) -> CliResult<()> {
    let level = settings.get("log_level", "info".to_string())?;
    let env = env_logger::Env::new().filter_or("QUADFUSE_LOG", level);
    let _ = env_logger::Builder::from_env(env).target(env_logger::Target::Stderr).try_init();
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let c = cli.command.common().clone();
    let mut s = Settings::load(c.config.as_deref(), c.seed, c.out.as_deref())?;
    init_logging(&mut s)?;
    match cli.command {
        Command::Synth(_) => commands::synth(&mut s),
        Command::PrepareTs(_) => commands::prepare_ts(&mut s),
        Command::PrepareBench(_) => commands::prepare_bench(&mut s),
        Command::Train { stage, .. } => match stage.as_str() {
            "1" => commands::train_stage1(&mut s),
            _ => commands::train_stage2(&mut s),
        },
        Command::Eval { mask, .. } => commands::eval(&mut s, mask.as_deref()),
        Command::Ablate(_) => commands::ablate(&mut s),
        Command::Uq(_) => commands::uq(&mut s),
        Command::BaselineBio(_) => commands::baseline_bio(&mut s),
        Command::Plot(_) => plot::run(&mut s),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
