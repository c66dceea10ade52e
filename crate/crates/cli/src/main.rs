//! `callmine`: run the call-mining pipeline stage by stage.

mod config;
mod stage;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use stage::{Stale, Stage};

/// Exit codes.
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_STALE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "callmine", version, about = "Mine call reasons and call motivators from inbound-call corpora")]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory; overrides `paths.out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (data/calls.jsonl, data/clicks.jsonl).
    Synth,
    /// Load and validate inputs, split train/validation, build summary pairs.
    Prepare,
    /// Train the seq2seq summarizer variants.
    TrainSummarizer,
    /// Decode an intent for every call.
    Intents,
    /// Cluster intents into call reasons.
    Cluster,
    /// Fit feature views and 1-vs-all source models.
    TrainMotivators,
    /// Train stacking ensembles and write the model registry.
    Ensemble,
    /// Score summaries (ROUGE) and motivator models on validation.
    Evaluate,
    /// Write the report CSVs.
    Report,
    /// Print the effective configuration as TOML.
    Config,
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Prepare => Stage::Prepare,
            Command::TrainSummarizer => Stage::TrainSummarizer,
            Command::Intents => Stage::Intents,
            Command::Cluster => Stage::Cluster,
            Command::TrainMotivators => Stage::TrainMotivators,
            Command::Ensemble => Stage::Ensemble,
            Command::Evaluate => Stage::Evaluate,
            Command::Report => Stage::Report,
            Command::Config => return None,
        })
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<Stale>()) {
        EXIT_STALE
    } else {
        EXIT_DATA
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let Some(stage) = cli.command.stage() else {
        match toml::to_string(&cfg) {
            Ok(s) => {
                print!("{s}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    };
    let ctx = stages::Ctx { out: cfg.paths.out.clone(), cfg };
    match stages::run(stage, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
