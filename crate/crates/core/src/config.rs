//! Whole-pipeline configuration file (TOML). Every section and key is
//! optional and falls back to its default; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{build_task_graph, GraphSpec, TaskGraph};
use crate::emotion::{EmotionConfig, DEFAULT_MIN_AREA_FRACTION, DEFAULT_THRESHOLD, DEFAULT_TOP_N};
use crate::grpo::{SigmaMode, DEFAULT_EPS_FLOOR, DEFAULT_MAX_CLIPS};
use crate::multiperson::{DynamicTrackConfig, DEFAULT_MIN_DISPLACEMENT_FRAC, DEFAULT_MIN_SEGMENT_S, DEFAULT_MIN_TRACK_FRAMES};
use crate::sample::{ProfileSet, TaskProfile, DEFAULT_SAMPLE_FRAMES};
use crate::silent::{DEFAULT_CLIP_LEN_S, DEFAULT_STRIDE_S};
use crate::validate::FilterConfig;

pub const CONFIG_ENV: &str = "AVATAR_FORGE_CONFIG";
pub const DEFAULT_PARALLELISM: usize = 4;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub records: Option<PathBuf>,
    pub clips: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub annotate: u64,
    pub sample: u64,
    pub rollout: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub frames: u64,
    pub profile: String,
    pub profiles: BTreeMap<String, TaskProfile>,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self { frames: DEFAULT_SAMPLE_FRAMES, profile: "closeup".into(), profiles: ProfileSet::default().profiles }
    }
}

impl SampleSection {
    pub fn profile_set(&self) -> ProfileSet {
        ProfileSet { profiles: self.profiles.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultipersonSection {
    pub min_segment_s: f64,
    pub min_center_displacement_frac: f64,
    pub min_track_frames: usize,
}

impl Default for MultipersonSection {
    fn default() -> Self {
        Self {
            min_segment_s: DEFAULT_MIN_SEGMENT_S,
            min_center_displacement_frac: DEFAULT_MIN_DISPLACEMENT_FRAC,
            min_track_frames: DEFAULT_MIN_TRACK_FRAMES,
        }
    }
}

impl MultipersonSection {
    pub fn dynamic(&self) -> DynamicTrackConfig {
        DynamicTrackConfig { min_center_displacement_frac: self.min_center_displacement_frac, min_frames: self.min_track_frames }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SilentSection {
    pub clip_len_s: f64,
    pub stride_s: f64,
}

impl Default for SilentSection {
    fn default() -> Self {
        Self { clip_len_s: DEFAULT_CLIP_LEN_S, stride_s: DEFAULT_STRIDE_S }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionSection {
    pub top_n: usize,
    pub threshold: f64,
    pub min_area_fraction: f64,
}

impl Default for EmotionSection {
    fn default() -> Self {
        Self { top_n: DEFAULT_TOP_N, threshold: DEFAULT_THRESHOLD, min_area_fraction: DEFAULT_MIN_AREA_FRACTION }
    }
}

impl EmotionSection {
    pub fn to_config(&self) -> EmotionConfig {
        EmotionConfig { top_n: self.top_n, threshold: self.threshold, min_area_fraction: self.min_area_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoSection {
    pub eps_floor: f64,
    pub sigma_mode: SigmaMode,
    pub max_clips: usize,
}

impl Default for GrpoSection {
    fn default() -> Self {
        Self { eps_floor: DEFAULT_EPS_FLOOR, sigma_mode: SigmaMode::MaxOverPartitions, max_clips: DEFAULT_MAX_CLIPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub parallelism: usize,
    pub seeds: Seeds,
    pub paths: Paths,
    /// Annotator graph; the nine-node default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    pub validate: FilterConfig,
    pub sample: SampleSection,
    pub multiperson: MultipersonSection,
    pub silent: SilentSection,
    pub emotion: EmotionSection,
    pub grpo: GrpoSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            parallelism: DEFAULT_PARALLELISM,
            seeds: Seeds::default(),
            paths: Paths::default(),
            graph: None,
            validate: FilterConfig::default(),
            sample: SampleSection::default(),
            multiperson: MultipersonSection::default(),
            silent: SilentSection::default(),
            emotion: EmotionSection::default(),
            grpo: GrpoSection::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, path)
    }

    pub fn graph_spec(&self) -> GraphSpec {
        self.graph.clone().unwrap_or_else(|| GraphSpec::default_graph(self.seeds.annotate))
    }

    pub fn task_graph(&self) -> Result<TaskGraph, ConfigError> {
        build_task_graph(self.graph_spec().annotators).map_err(|e| invalid(format!("graph: {e}")))
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.parallelism == 0 {
            return Err(invalid("parallelism must be at least 1"));
        }
        self.validate.check().map_err(|e| invalid(e.to_string()))?;
        self.task_graph()?;

        let s = &self.sample;
        if s.frames == 0 {
            return Err(invalid("sample.frames must be positive"));
        }
        let profiles = s.profile_set();
        profiles.check().map_err(|e| invalid(format!("sample.profiles: {e}")))?;
        profiles.get(&s.profile).map_err(|e| invalid(format!("sample.profile: {e}")))?;

        let m = &self.multiperson;
        if !(m.min_segment_s.is_finite() && m.min_segment_s >= 0.0) {
            return Err(invalid("multiperson.min_segment_s must be finite and non-negative"));
        }
        if !(m.min_center_displacement_frac.is_finite() && m.min_center_displacement_frac >= 0.0) {
            return Err(invalid("multiperson.min_center_displacement_frac must be finite and non-negative"));
        }

        let sl = &self.silent;
        if !(sl.clip_len_s.is_finite() && sl.clip_len_s > 0.0) {
            return Err(invalid("silent.clip_len_s must be positive"));
        }
        if !(sl.stride_s > 0.0 && sl.stride_s <= sl.clip_len_s) {
            return Err(invalid("silent.stride_s must lie in (0, clip_len_s]"));
        }

        let e = &self.emotion;
        if e.top_n == 0 {
            return Err(invalid("emotion.top_n must be at least 1"));
        }
        if !e.threshold.is_finite() || !e.min_area_fraction.is_finite() {
            return Err(invalid("emotion thresholds must be finite"));
        }

        let g = &self.grpo;
        if !(g.eps_floor.is_finite() && g.eps_floor > 0.0) {
            return Err(invalid("grpo.eps_floor must be positive"));
        }
        if g.max_clips == 0 {
            return Err(invalid("grpo.max_clips must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        PipelineConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(parse("").unwrap(), PipelineConfig::default());
        PipelineConfig::default().check().unwrap();
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = parse("parallelism = 8\n[validate.audio_sync]\nmin_confidence = 0.6\n[emotion]\nthreshold = 0.8\n").unwrap();
        assert_eq!(cfg.parallelism, 8);
        assert_eq!(cfg.validate.audio_sync.min_confidence, 0.6);
        assert_eq!(cfg.validate.audio_sync.max_abs_offset_ms, 120.0);
        assert_eq!(cfg.emotion.threshold, 0.8);
        assert_eq!(cfg.emotion.top_n, 10);
    }

    #[test]
    fn typos_are_rejected() {
        assert!(matches!(parse("[validate.audio_sync]\nmin_confidense = 0.6\n"), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse("paralelism = 2\n"), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse("[silent]\nclip_len = 2.0\n"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn semantic_errors() {
        assert!(matches!(parse("parallelism = 0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[validate.duration]\nmin_s = 10.0\nmax_s = 5.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[silent]\nclip_len_s = 2.0\nstride_s = 3.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[sample]\nprofile = \"nope\"\n"), Err(ConfigError::Invalid(_))));
        let cyclic = r#"
            [[graph.annotators]]
            name = "a"
            produces = ["face"]
            depends_on = ["b"]
            backend = { kind = "builtin", mock = "face" }
            [[graph.annotators]]
            name = "b"
            produces = ["body"]
            depends_on = ["a"]
            backend = { kind = "builtin", mock = "body" }
        "#;
        match parse(cyclic) {
            Err(ConfigError::Invalid(m)) => assert!(m.contains("cycle"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.graph = Some(GraphSpec::default_graph(3));
        cfg.grpo.sigma_mode = SigmaMode::PerPartition;
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse(&text).unwrap(), cfg);
    }
}
