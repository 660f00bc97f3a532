//! In-memory annotate -> validate -> sample run.

use thiserror::Error;

use crate::annotate::{instantiate, run_with_backends, AnnotatorError, RunReport};
use crate::config::{ConfigError, PipelineConfig};
use crate::model::{TrainingSample, VideoRecord};
use crate::sample::{build_samples, SampleError, SampleStats};
use crate::validate::{join_candidates, run_filter_chain, AcceptedClip, ClipEntry, FilterReport, ValidateError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("annotation: {0}")]
    Annotate(#[from] AnnotatorError),
    #[error("validation: {0}")]
    Validate(#[from] ValidateError),
    #[error("sampling: {0}")]
    Sample(#[from] SampleError),
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub annotated: Vec<VideoRecord>,
    pub annotation: RunReport,
    pub accepted: Vec<AcceptedClip>,
    pub filter_report: FilterReport,
    pub samples: Vec<TrainingSample>,
    pub sample_stats: SampleStats,
}

pub fn run_pipeline(records: &[VideoRecord], clips: Vec<ClipEntry>, cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    cfg.check()?;
    let graph = cfg.task_graph()?;
    let backends = instantiate(&graph, cfg.graph_spec().seed)?;
    let (annotated, annotation) = run_with_backends(records, &graph, &backends, cfg.parallelism);
    let candidates = join_candidates(&annotated, clips)?;
    let (accepted, filter_report, _) = run_filter_chain(candidates, &cfg.validate)?;
    let profiles = cfg.sample.profile_set();
    let profile = profiles.get(&cfg.sample.profile)?;
    let (samples, sample_stats) = build_samples(&accepted, profile, cfg.sample.frames, cfg.seeds.sample)?;
    Ok(PipelineRun { annotated, annotation, accepted, filter_report, samples, sample_stats })
}
