use serde::{Deserialize, Serialize};

use super::{StageName, ValidateError};
use crate::model::{ArtifactFlag, CameraMotion, CameraType, MotionSpeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioSyncParams {
    pub min_confidence: f64,
    pub max_abs_offset_ms: f64,
}

impl Default for AudioSyncParams {
    fn default() -> Self {
        Self { min_confidence: 0.5, max_abs_offset_ms: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraParams {
    pub allowed_types: Vec<CameraType>,
    pub rejected_motions: Vec<CameraMotion>,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            allowed_types: vec![CameraType::Static, CameraType::Handheld, CameraType::Tracking],
            rejected_motions: vec![CameraMotion::Shake],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityParams {
    pub min_perceptual_score: f64,
    pub rejected_flags: Vec<ArtifactFlag>,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            min_perceptual_score: 0.4,
            rejected_flags: vec![
                ArtifactFlag::TextCoverage,
                ArtifactFlag::Border,
                ArtifactFlag::BlackBorder,
                ArtifactFlag::AbnormalBrightness,
                ArtifactFlag::PixelDegradation,
                ArtifactFlag::Subtitle,
                ArtifactFlag::WhiteFlash,
                ArtifactFlag::Transition,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DurationParams {
    pub min_s: f64,
    pub max_s: f64,
}

impl Default for DurationParams {
    fn default() -> Self {
        Self { min_s: 3.0, max_s: 120.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisualDefectParams {
    pub black_thr: f64,
    pub white_thr: f64,
    pub max_black_ratio: f64,
    pub max_white_ratio: f64,
    /// Largest border width as a fraction of the matching frame dimension.
    pub max_border_frac: f64,
    pub border_variance_eps: f64,
    pub jump_k: f64,
}

impl Default for VisualDefectParams {
    fn default() -> Self {
        Self {
            black_thr: 0.06,
            white_thr: 0.94,
            max_black_ratio: 0.30,
            max_white_ratio: 0.30,
            max_border_frac: 0.10,
            border_variance_eps: 1e-4,
            jump_k: 6.0,
        }
    }
}

impl VisualDefectParams {
    pub fn stats_params(&self) -> super::StatsParams {
        super::StatsParams {
            black_thr: self.black_thr,
            white_thr: self.white_thr,
            border_variance_eps: self.border_variance_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    pub allowed_speeds: Vec<MotionSpeed>,
    pub min_intensity: f64,
    pub max_intensity: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self { allowed_speeds: vec![MotionSpeed::Natural], min_intensity: 0.0, max_intensity: 1.0 }
    }
}

/// Where the mask-area stage gets its fraction from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskSource {
    /// The candidate's own `mask_fraction`, falling back to face boxes.
    #[default]
    Auto,
    Candidate,
    FaceBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskAreaParams {
    pub min_fraction: f64,
    pub source: MaskSource,
}

impl Default for MaskAreaParams {
    fn default() -> Self {
        Self { min_fraction: 0.05, source: MaskSource::Auto }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub audio_sync: AudioSyncParams,
    pub camera: CameraParams,
    pub text_visual_quality: QualityParams,
    pub duration: DurationParams,
    pub visual_defects: VisualDefectParams,
    pub motion: MotionParams,
    pub mask_area: MaskAreaParams,
}

fn finite(stage: StageName, param: &'static str, v: f64) -> Result<(), ValidateError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ValidateError::ConfigIncomplete { stage, param, problem: format!("must be finite, got {v}") })
    }
}

fn ordered(stage: StageName, param: &'static str, lo: f64, hi: f64) -> Result<(), ValidateError> {
    if lo <= hi {
        Ok(())
    } else {
        Err(ValidateError::ConfigIncomplete { stage, param, problem: format!("lower bound {lo} exceeds upper bound {hi}") })
    }
}

impl FilterConfig {
    /// Every threshold must be usable; the chain refuses to run otherwise.
    pub fn check(&self) -> Result<(), ValidateError> {
        use StageName::*;
        let a = &self.audio_sync;
        finite(AudioSync, "min_confidence", a.min_confidence)?;
        finite(AudioSync, "max_abs_offset_ms", a.max_abs_offset_ms)?;
        if self.camera.allowed_types.is_empty() {
            return Err(ValidateError::ConfigIncomplete {
                stage: CameraSuitability,
                param: "allowed_types",
                problem: "is empty".into(),
            });
        }
        finite(TextVisualQuality, "min_perceptual_score", self.text_visual_quality.min_perceptual_score)?;
        let d = &self.duration;
        finite(Duration, "min_s", d.min_s)?;
        finite(Duration, "max_s", d.max_s)?;
        ordered(Duration, "min_s", d.min_s, d.max_s)?;
        let v = &self.visual_defects;
        for (name, value) in [
            ("black_thr", v.black_thr),
            ("white_thr", v.white_thr),
            ("max_black_ratio", v.max_black_ratio),
            ("max_white_ratio", v.max_white_ratio),
            ("max_border_frac", v.max_border_frac),
            ("border_variance_eps", v.border_variance_eps),
            ("jump_k", v.jump_k),
        ] {
            finite(VisualDefects, name, value)?;
        }
        ordered(VisualDefects, "black_thr", v.black_thr, v.white_thr)?;
        if v.jump_k <= 1.0 {
            return Err(ValidateError::ConfigIncomplete {
                stage: VisualDefects,
                param: "jump_k",
                problem: format!("must exceed 1, got {}", v.jump_k),
            });
        }
        let m = &self.motion;
        if m.allowed_speeds.is_empty() {
            return Err(ValidateError::ConfigIncomplete {
                stage: MotionConsistency,
                param: "allowed_speeds",
                problem: "is empty".into(),
            });
        }
        finite(MotionConsistency, "min_intensity", m.min_intensity)?;
        finite(MotionConsistency, "max_intensity", m.max_intensity)?;
        ordered(MotionConsistency, "min_intensity", m.min_intensity, m.max_intensity)?;
        finite(MaskArea, "min_fraction", self.mask_area.min_fraction)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_complete() {
        assert!(FilterConfig::default().check().is_ok());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: FilterConfig = toml::from_str("[audio_sync]\nmin_confidence = 0.8\n").unwrap();
        assert_eq!(cfg.audio_sync.min_confidence, 0.8);
        assert_eq!(cfg.audio_sync.max_abs_offset_ms, 120.0);
        assert_eq!(cfg.duration, DurationParams::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FilterConfig>("[audio_sync]\nmin_confidance = 0.8\n").is_err());
        assert!(toml::from_str::<FilterConfig>("[audio]\n").is_err());
    }

    #[test]
    fn unusable_thresholds_rejected() {
        let mut cfg = FilterConfig::default();
        cfg.audio_sync.min_confidence = f64::NAN;
        assert!(matches!(cfg.check(), Err(ValidateError::ConfigIncomplete { param: "min_confidence", .. })));
        let mut cfg = FilterConfig::default();
        cfg.duration.min_s = 200.0;
        assert!(cfg.check().is_err());
        let mut cfg = FilterConfig::default();
        cfg.visual_defects.jump_k = 1.0;
        assert!(cfg.check().is_err());
    }
}
