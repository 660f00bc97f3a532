mod curate;
mod error;
mod io;
mod stats;
mod tools;

use std::path::PathBuf;
use std::process::ExitCode;

use avatar_forge::config::{PipelineConfig, CONFIG_ENV};
use clap::{Parser, Subcommand};

use crate::error::{Classify, CliResult};

/// Curation, conditioning and training-signal tools for audio-driven avatar video data.
///
/// Exit codes: 0 success, 1 input or schema error, 2 configuration or usage error.
#[derive(Debug, Parser)]
#[command(name = "avatar-forge", version)]
struct Cli {
    /// Pipeline config (TOML). Unknown keys are rejected; absent keys take defaults.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the annotator graph over records.
    Annotate(curate::AnnotateArgs),
    /// Run the staged clip filter chain and write a drop report.
    Validate(curate::ValidateArgs),
    /// Select a task subset and sample one window per accepted clip.
    Sample(curate::SampleArgs),
    /// Dynamic-person partition and single-speaker segments.
    Multiperson(tools::MultipersonArgs),
    /// Video-level silence labels from two-model clip verdicts.
    Silent(tools::SilentArgs),
    /// Emotion category, dominant class and retention per video.
    Emotion(tools::EmotionArgs),
    /// Audio feature alignment with a seeded stub encoder.
    AudioAlign(tools::AudioAlignArgs),
    /// Advantages and rollout planning.
    #[command(subcommand)]
    Grpo(tools::GrpoCommand),
    /// Filter report merging, tables and the synthetic corpus.
    #[command(subcommand)]
    Stats(stats::StatsCommand),
}

fn run(cli: Cli) -> CliResult {
    let cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path).config()?,
        None => PipelineConfig::default(),
    };
    match &cli.command {
        Command::Annotate(args) => curate::annotate(args, &cfg),
        Command::Validate(args) => curate::validate(args, &cfg),
        Command::Sample(args) => curate::sample(args, &cfg),
        Command::Multiperson(args) => tools::multiperson(args, &cfg),
        Command::Silent(args) => tools::silent(args, &cfg),
        Command::Emotion(args) => tools::emotion(args, &cfg),
        Command::AudioAlign(args) => tools::audio_align(args),
        Command::Grpo(cmd) => tools::grpo(cmd, &cfg),
        Command::Stats(cmd) => stats::stats(cmd),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_target(false)
        .without_time()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
