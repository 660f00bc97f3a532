use std::path::PathBuf;

use anyhow::anyhow;
use avatar_forge::annotate::{build_task_graph, instantiate, run_with_backends, GraphSpec};
use avatar_forge::config::PipelineConfig;
use avatar_forge::sample::{build_samples, ProfileSet};
use avatar_forge::validate::{join_candidates, run_filter_chain, AcceptedClip, ClipEntry};
use avatar_forge::ClipWindow;
use clap::Args;
use tracing::{info, warn};

use crate::error::{Classify, CliError, CliResult};
use crate::io::{check_records, ensure_distinct, read_config_file, read_lines, read_records, write_doc, write_lines};

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Input records (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Annotated records (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Annotator graph (TOML). Falls back to the config's graph, then the built-in nine-annotator graph.
    #[arg(long, value_name = "FILE")]
    pub graph: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Seed for built-in backends; overrides the graph's own seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-record annotator failures (JSONL).
    #[arg(long, value_name = "FILE")]
    pub failures: Option<PathBuf>,
    /// Per-item status and timing (JSONL). Timestamps differ between runs.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

pub fn annotate(args: &AnnotateArgs, cfg: &PipelineConfig) -> CliResult {
    let outputs: Vec<_> = [Some(&args.out), args.failures.as_ref(), args.trace.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect();
    ensure_distinct(&[&args.input], &outputs)?;
    let mut spec = match &args.graph {
        Some(path) => read_config_file::<GraphSpec>(path)?,
        None => cfg.graph_spec(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let graph = build_task_graph(spec.annotators).config()?;
    let parallelism = args.parallelism.unwrap_or(cfg.parallelism);
    if parallelism == 0 {
        return Err(CliError::config(anyhow!("--parallelism must be at least 1")));
    }
    let records = read_records(&args.input)?;
    let backends = instantiate(&graph, spec.seed).config()?;
    let (annotated, report) = run_with_backends(&records, &graph, &backends, parallelism);
    write_lines(&args.out, &annotated)?;
    if let Some(path) = &args.failures {
        write_lines(path, &report.failures)?;
    }
    if let Some(path) = &args.trace {
        write_lines(path, &report.traces)?;
    }
    for f in &report.failures {
        warn!("{} / {}: {:?}: {}", f.video_id, f.annotator, f.kind, f.message);
    }
    info!("annotated {} records with {} annotators, {} failures", annotated.len(), graph.len(), report.failures.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Annotated records (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Candidate clip windows with measured frame statistics (JSONL).
    /// Without it every record contributes one full-length clip with no pixel data.
    #[arg(long, value_name = "FILE")]
    pub clips: Option<PathBuf>,
    /// Filter report (JSON).
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Accepted clips (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn validate(args: &ValidateArgs, cfg: &PipelineConfig) -> CliResult {
    let mut inputs = vec![args.input.as_path()];
    inputs.extend(args.clips.as_deref());
    ensure_distinct(&inputs, &[&args.out, &args.report])?;
    let records = read_records(&args.input)?;
    let clips: Vec<ClipEntry> = match &args.clips {
        Some(path) => read_lines(path)?,
        None => records
            .iter()
            .map(|r| ClipEntry {
                clip: ClipWindow { video_id: r.video_id.clone(), start_frame: 0, end_frame: r.frame_count(), fps: r.fps },
                frame_stats: None,
                mask_fraction: None,
            })
            .collect(),
    };
    let candidates = join_candidates(&records, clips).input()?;
    let (accepted, report, _) = run_filter_chain(candidates, &cfg.validate).config()?;
    write_lines(&args.out, &accepted)?;
    write_doc(&args.report, &report)?;
    info!("validated {} candidates, {} accepted", report.total(), report.accepted);
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Accepted clips from `validate` (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Profile name, e.g. closeup, body, complex or music.
    #[arg(long)]
    pub profile: Option<String>,
    /// Profile definitions (TOML, or JSON by extension); replaces the configured set.
    #[arg(long, value_name = "FILE")]
    pub profiles: Option<PathBuf>,
    /// Window length in frames.
    #[arg(long)]
    pub frames: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training manifest (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn sample(args: &SampleArgs, cfg: &PipelineConfig) -> CliResult {
    let mut inputs = vec![args.input.as_path()];
    inputs.extend(args.profiles.as_deref());
    ensure_distinct(&inputs, &[&args.out])?;
    let profiles: ProfileSet = match &args.profiles {
        Some(path) => read_config_file(path)?,
        None => cfg.sample.profile_set(),
    };
    profiles.check().config()?;
    let name = args.profile.as_deref().unwrap_or(&cfg.sample.profile);
    let profile = profiles.get(name).config()?;
    let frames = args.frames.unwrap_or(cfg.sample.frames);
    if frames == 0 {
        return Err(CliError::config(anyhow!("--frames must be positive")));
    }
    let accepted: Vec<AcceptedClip> = read_lines(&args.input)?;
    check_records(&args.input, accepted.iter().map(|a| &a.record))?;
    let (samples, stats) = build_samples(&accepted, profile, frames, args.seed.unwrap_or(cfg.seeds.sample)).input()?;
    write_lines(&args.out, &samples)?;
    info!("profile {name}: {} clips considered, {} selected, {} too short", stats.considered, stats.selected, stats.too_short);
    Ok(())
}
