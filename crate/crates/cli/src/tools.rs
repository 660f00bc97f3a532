use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::anyhow;
use avatar_forge::audio_align::{align_audio, StubEncoder, HIDDEN_DIM, WINDOW_FRAMES};
use avatar_forge::config::PipelineConfig;
use avatar_forge::emotion::{evaluate_video, EmotionVerdict, ExclusionFlags, FrameEmotionMatrix};
use avatar_forge::grpo::{advantages, plan_multiclip_rollout, RewardTensor, SigmaMode};
use avatar_forge::multiperson::{
    build_condition_binding, derive_single_speaker_segments, dynamic_tracks, person_partition, ConditionBinding, PersonPartition, SpeakerSegment,
    TrackSet,
};
use avatar_forge::silent::{decompose_clip_windows, label_videos, ClipVerdict};
use avatar_forge::tensor_io::{read_tensor, write_tensor};
use avatar_forge::{jsonl, ClipWindow};
use clap::{Args, Subcommand, ValueEnum};
use ndarray::{Array3, Ix3};
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::error::{Classify, CliError, CliResult};
use crate::io::{ensure_distinct, read_json, read_lines, read_records, write_doc, write_lines};

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
pub struct MultipersonArgs {
    #[command(subcommand)]
    pub action: Option<MultipersonAction>,
    /// Person tracks, one track set per video (JSONL).
    #[arg(long, value_name = "FILE", required = true)]
    pub tracks: Option<PathBuf>,
    /// Minimum single-speaker segment length in seconds.
    #[arg(long = "min-seg", value_name = "SECONDS")]
    pub min_seg: Option<f64>,
    /// Per-video partition and segments (JSONL).
    #[arg(long, value_name = "FILE", required = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MultipersonAction {
    /// Bind one or two target speakers to audio streams; everyone else gets the silent stream.
    Bind(BindArgs),
}

#[derive(Debug, Args)]
pub struct BindArgs {
    #[arg(long, value_name = "FILE")]
    pub tracks: PathBuf,
    /// Video to bind; may be omitted when the file holds a single video.
    #[arg(long)]
    pub video: Option<String>,
    /// Target track ids, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<String>,
    /// Binding (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SegmentLine {
    video_id: String,
    partition: PersonPartition,
    dynamic_tracks: Vec<String>,
    segments: Vec<SpeakerSegment>,
}

#[derive(Debug, Serialize)]
struct BindingDoc {
    video_id: String,
    #[serde(flatten)]
    binding: ConditionBinding,
}

fn read_track_sets(path: &std::path::Path) -> CliResult<Vec<TrackSet>> {
    let sets: Vec<TrackSet> = read_lines(path)?;
    for s in &sets {
        s.validate().map_err(|e| CliError::input(anyhow!("{}: video {}: {e}", path.display(), s.video_id)))?;
    }
    Ok(sets)
}

pub fn multiperson(args: &MultipersonArgs, cfg: &PipelineConfig) -> CliResult {
    if let Some(MultipersonAction::Bind(bind)) = &args.action {
        return multiperson_bind(bind);
    }
    let (Some(tracks), Some(out)) = (&args.tracks, &args.out) else {
        return Err(CliError::config(anyhow!("--tracks and --out are required")));
    };
    ensure_distinct(&[tracks], &[out])?;
    let min_seg = args.min_seg.unwrap_or(cfg.multiperson.min_segment_s);
    if !(min_seg.is_finite() && min_seg >= 0.0) {
        return Err(CliError::config(anyhow!("--min-seg must be finite and non-negative")));
    }
    let dynamic = cfg.multiperson.dynamic();
    let lines: Vec<SegmentLine> = read_track_sets(tracks)?
        .iter()
        .map(|set| SegmentLine {
            video_id: set.video_id.clone(),
            partition: person_partition(set, &dynamic),
            dynamic_tracks: dynamic_tracks(set, &dynamic).iter().map(|t| t.track_id.clone()).collect(),
            segments: derive_single_speaker_segments(&set.tracks, min_seg),
        })
        .collect();
    write_lines(out, &lines)?;
    info!("{} videos, {} single-speaker segments", lines.len(), lines.iter().map(|l| l.segments.len()).sum::<usize>());
    Ok(())
}

fn multiperson_bind(args: &BindArgs) -> CliResult {
    ensure_distinct(&[&args.tracks], &[&args.out])?;
    let sets = read_track_sets(&args.tracks)?;
    let set = match &args.video {
        Some(id) => sets.iter().find(|s| &s.video_id == id).ok_or_else(|| CliError::input(anyhow!("video {id} not in {}", args.tracks.display())))?,
        None if sets.len() == 1 => &sets[0],
        None => return Err(CliError::config(anyhow!("{} holds {} videos; pass --video", args.tracks.display(), sets.len()))),
    };
    let targets: Vec<&str> = args.targets.iter().map(String::as_str).collect();
    let binding = build_condition_binding(&set.tracks, &targets).input()?;
    write_doc(&args.out, &BindingDoc { video_id: set.video_id.clone(), binding })
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
pub struct SilentArgs {
    #[command(subcommand)]
    pub action: Option<SilentAction>,
    /// Clip verdicts from the two speaking classifiers (JSONL).
    #[arg(long, value_name = "FILE", required = true)]
    pub verdicts: Option<PathBuf>,
    /// Video-level labels (JSONL).
    #[arg(long, value_name = "FILE", required = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SilentAction {
    /// Split each record into the clip windows to be classified.
    Clips(SilentClipsArgs),
}

#[derive(Debug, Args)]
pub struct SilentClipsArgs {
    /// Records (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long = "clip-len", value_name = "SECONDS")]
    pub clip_len: Option<f64>,
    #[arg(long, value_name = "SECONDS")]
    pub stride: Option<f64>,
    /// Clip windows (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn silent(args: &SilentArgs, cfg: &PipelineConfig) -> CliResult {
    if let Some(SilentAction::Clips(clips)) = &args.action {
        return silent_clips(clips, cfg);
    }
    let (Some(verdicts), Some(out)) = (&args.verdicts, &args.out) else {
        return Err(CliError::config(anyhow!("--verdicts and --out are required")));
    };
    ensure_distinct(&[verdicts], &[out])?;
    let verdicts: Vec<ClipVerdict> = read_lines(verdicts)?;
    let labels = label_videos(&verdicts);
    write_lines(out, &labels)?;
    info!("{} clip verdicts, {} videos labelled", verdicts.len(), labels.len());
    Ok(())
}

fn silent_clips(args: &SilentClipsArgs, cfg: &PipelineConfig) -> CliResult {
    ensure_distinct(&[&args.input], &[&args.out])?;
    let clip_len = args.clip_len.unwrap_or(cfg.silent.clip_len_s);
    let stride = args.stride.unwrap_or(cfg.silent.stride_s);
    if !(clip_len.is_finite() && clip_len > 0.0 && stride > 0.0 && stride <= clip_len) {
        return Err(CliError::config(anyhow!("need clip-len > 0 and 0 < stride <= clip-len")));
    }
    let windows: Vec<ClipWindow> = read_records(&args.input)?
        .iter()
        .flat_map(|r| decompose_clip_windows(&r.video_id, r.duration_s, r.fps, clip_len, stride))
        .collect();
    write_lines(&args.out, &windows)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EmotionArgs {
    /// Per-video frame confidences: `{"video_id", "class_names", "scores"}` (JSONL).
    #[arg(long, value_name = "FILE")]
    pub matrix: PathBuf,
    /// Per-video exclusion flags and candidate categories: `{"video_id", "flags", "candidates"}` (JSONL).
    #[arg(long, value_name = "FILE")]
    pub flags: PathBuf,
    /// Top-N frames averaged per class.
    #[arg(long)]
    pub n: Option<usize>,
    /// Retain strictly above this score.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Verdicts (JSONL).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixLine {
    video_id: String,
    class_names: Vec<String>,
    scores: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagsLine {
    video_id: String,
    flags: ExclusionFlags,
    candidates: Vec<u8>,
}

#[derive(Debug, Serialize)]
struct VerdictLine {
    video_id: String,
    #[serde(flatten)]
    verdict: EmotionVerdict,
}

pub fn emotion(args: &EmotionArgs, cfg: &PipelineConfig) -> CliResult {
    ensure_distinct(&[&args.matrix, &args.flags], &[&args.out])?;
    let mut ecfg = cfg.emotion.to_config();
    if let Some(n) = args.n {
        ecfg.top_n = n;
    }
    if let Some(t) = args.threshold {
        ecfg.threshold = t;
    }
    if ecfg.top_n == 0 || !ecfg.threshold.is_finite() {
        return Err(CliError::config(anyhow!("--n must be at least 1 and --threshold finite")));
    }
    let matrices: Vec<MatrixLine> = read_lines(&args.matrix)?;
    let flags: BTreeMap<String, FlagsLine> = read_lines::<FlagsLine>(&args.flags)?.into_iter().map(|f| (f.video_id.clone(), f)).collect();
    let mut out = Vec::with_capacity(matrices.len());
    for m in matrices {
        let f = flags.get(&m.video_id).ok_or_else(|| CliError::input(anyhow!("no flags for video {}", m.video_id)))?;
        let matrix = FrameEmotionMatrix::from_rows(m.class_names, &m.scores).map_err(|e| CliError::input(anyhow!("video {}: {e}", m.video_id)))?;
        let verdict = evaluate_video(&f.flags, &f.candidates, &matrix, &ecfg).map_err(|e| CliError::input(anyhow!("video {}: {e}", m.video_id)))?;
        out.push(VerdictLine { video_id: m.video_id, verdict });
    }
    write_lines(&args.out, &out)?;
    info!("{} videos, {} retained", out.len(), out.iter().filter(|v| v.verdict.retained).count());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dump {
    Shapes,
    None,
}

#[derive(Debug, Args)]
pub struct AudioAlignArgs {
    /// Audio length in seconds.
    #[arg(long)]
    pub duration: f64,
    /// Seed of the stub encoder.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden size of the stub encoder.
    #[arg(long, default_value_t = HIDDEN_DIM)]
    pub dim: usize,
    /// What to print to stdout.
    #[arg(long, value_enum, default_value_t = Dump::Shapes)]
    pub dump: Dump,
    /// Latent-rate features (f32 tensor with JSON sidecar).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Video-rate features (f32 tensor with JSON sidecar).
    #[arg(long = "aligned-out", value_name = "FILE")]
    pub aligned_out: Option<PathBuf>,
}

pub fn audio_align(args: &AudioAlignArgs) -> CliResult {
    if !(args.duration.is_finite() && args.duration > 0.0) || args.dim == 0 {
        return Err(CliError::config(anyhow!("--duration must be positive and --dim at least 1")));
    }
    let trace = align_audio(args.duration, &StubEncoder::with_dim(args.seed, args.dim), WINDOW_FRAMES).input()?;
    if args.dump == Dump::Shapes {
        let mut text = format!("encoder_frames {}\nvideo_frames {}\n", trace.encoder_frames, trace.video_frames);
        for (i, ((start, len), shape)) in trace.windows.iter().zip(&trace.window_shapes).enumerate() {
            text.push_str(&format!("window {i} start {start} length {len} hidden {shape:?}\n"));
        }
        text.push_str(&format!("pooled {:?}\naligned {:?}\nlatent {:?}\n", trace.pooled.shape(), trace.aligned.shape(), trace.latent.shape()));
        std::io::stdout().write_all(text.as_bytes()).input()?;
    }
    if let Some(path) = &args.out {
        write_tensor(path, &trace.latent.into_inner().into_dyn()).input()?;
    }
    if let Some(path) = &args.aligned_out {
        write_tensor(path, &trace.aligned.into_inner().into_dyn()).input()?;
    }
    Ok(())
}

#[derive(Debug, Subcommand)]
pub enum GrpoCommand {
    /// Per-frame group-relative advantages from a `G x K x J` reward tensor.
    Advantage(AdvantageArgs),
    /// Draw a multi-clip rollout plan.
    Rollout(RolloutArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    /// Largest group std over partitions, per reward.
    #[value(alias = "max-over-partitions")]
    Max,
    /// Each partition's own group std.
    PerPartition,
}

impl From<SigmaArg> for SigmaMode {
    fn from(s: SigmaArg) -> Self {
        match s {
            SigmaArg::Max => SigmaMode::MaxOverPartitions,
            SigmaArg::PerPartition => SigmaMode::PerPartition,
        }
    }
}

#[derive(Debug, Args)]
pub struct AdvantageArgs {
    /// Reward tensor (f32, shape samples x rewards x partitions, JSON sidecar).
    #[arg(long, value_name = "FILE")]
    pub rewards: PathBuf,
    /// Reward weights as a JSON array, one per reward model.
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    #[arg(long = "sigma-mode", value_enum)]
    pub sigma_mode: Option<SigmaArg>,
    #[arg(long = "eps-floor")]
    pub eps_floor: Option<f64>,
    /// Weighted advantages, samples x partitions.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-reward advantages, same shape as the rewards.
    #[arg(long = "per-reward-out", value_name = "FILE")]
    pub per_reward_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long = "max-clips")]
    pub max_clips: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Plan (JSON); stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn grpo(cmd: &GrpoCommand, cfg: &PipelineConfig) -> CliResult {
    match cmd {
        GrpoCommand::Advantage(args) => grpo_advantage(args, cfg),
        GrpoCommand::Rollout(args) => {
            let max_clips = args.max_clips.unwrap_or(cfg.grpo.max_clips);
            if max_clips == 0 {
                return Err(CliError::config(anyhow!("--max-clips must be at least 1")));
            }
            let plan = plan_multiclip_rollout(max_clips, args.seed.unwrap_or(cfg.seeds.rollout));
            match &args.out {
                Some(path) => write_doc(path, &plan),
                None => std::io::stdout().write_all(jsonl::to_canonical_pretty(&plan).as_bytes()).input(),
            }
        }
    }
}

fn grpo_advantage(args: &AdvantageArgs, cfg: &PipelineConfig) -> CliResult {
    let outputs: Vec<_> = [Some(&args.out), args.per_reward_out.as_ref()].into_iter().flatten().map(PathBuf::as_path).collect();
    ensure_distinct(&[&args.rewards, &args.weights], &outputs)?;
    let eps = args.eps_floor.unwrap_or(cfg.grpo.eps_floor);
    if !(eps.is_finite() && eps > 0.0) {
        return Err(CliError::config(anyhow!("--eps-floor must be positive")));
    }
    let mode = args.sigma_mode.map(SigmaMode::from).unwrap_or(cfg.grpo.sigma_mode);
    let raw = read_tensor(&args.rewards).input()?;
    let values: Array3<f64> = raw
        .mapv(f64::from)
        .into_dimensionality::<Ix3>()
        .map_err(|_| CliError::input(anyhow!("{}: reward tensor must be 3-dimensional", args.rewards.display())))?;
    let weights: Vec<f64> = read_json(&args.weights)?;
    let rewards = RewardTensor::new(values, weights).input()?;
    let adv = advantages(&rewards, eps, mode).input()?;
    write_tensor(&args.out, &adv.total.mapv(|v| v as f32).into_dyn()).input()?;
    if let Some(path) = &args.per_reward_out {
        write_tensor(path, &adv.per_reward.mapv(|v| v as f32).into_dyn()).input()?;
    }
    Ok(())
}
