use std::fs;
use std::io::Write;
use std::path::PathBuf;

use avatar_forge::fixture::corpus;
use avatar_forge::jsonl;
use avatar_forge::validate::{merge_reports, FilterReport};
use clap::{Args, Subcommand};
use tracing::info;

use crate::error::{Classify, CliResult};
use crate::io::{ensure_distinct, read_json, write_doc, write_lines};

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Sum filter reports from several shards into one.
    Merge(MergeArgs),
    /// Print per-stage drop percentages of the merged reports.
    Table(TableArgs),
    /// Write the synthetic 20-record corpus (records.jsonl, clips.jsonl).
    GenFixture(GenFixtureArgs),
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(required = true, value_name = "REPORT")]
    pub reports: Vec<PathBuf>,
    /// Merged report (JSON); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(required = true, value_name = "REPORT")]
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenFixtureArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long = "out-dir", value_name = "DIR")]
    pub out_dir: PathBuf,
}

fn merged(paths: &[PathBuf]) -> CliResult<FilterReport> {
    let reports = paths.iter().map(|p| read_json::<FilterReport>(p)).collect::<CliResult<Vec<_>>>()?;
    merge_reports(&reports).input()
}

pub fn stats(cmd: &StatsCommand) -> CliResult {
    match cmd {
        StatsCommand::Merge(args) => {
            if let Some(out) = &args.out {
                let inputs: Vec<_> = args.reports.iter().map(PathBuf::as_path).collect();
                ensure_distinct(&inputs, &[out])?;
            }
            let report = merged(&args.reports)?;
            match &args.out {
                Some(path) => write_doc(path, &report),
                None => std::io::stdout().write_all(jsonl::to_canonical_pretty(&report).as_bytes()).input(),
            }
        }
        StatsCommand::Table(args) => {
            let report = merged(&args.reports)?;
            std::io::stdout().write_all(report.render_table().as_bytes()).input()
        }
        StatsCommand::GenFixture(args) => {
            fs::create_dir_all(&args.out_dir).input()?;
            let c = corpus(args.seed);
            write_lines(&args.out_dir.join("records.jsonl"), &c.records)?;
            write_lines(&args.out_dir.join("clips.jsonl"), &c.clips)?;
            info!("wrote {} records and {} clips to {}", c.records.len(), c.clips.len(), args.out_dir.display());
            Ok(())
        }
    }
}
