//! Online clip-level validation: seven ordered filter stages with per-stage
//! drop accounting, plus the pixel statistics the visual-defect stage reads.

mod chain;
mod config;
pub mod pixels;
mod report;
mod stages;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{join_candidates, run_filter_chain, AcceptedClip, Candidate, ClipEntry, Outcome};
pub use config::{
    AudioSyncParams, CameraParams, DurationParams, FilterConfig, MaskAreaParams, MaskSource, MotionParams,
    QualityParams, VisualDefectParams,
};
pub use pixels::{
    compute_frame_stats, compute_luma_stats, detect_border, detect_frame_jump, Border, FrameStats, LumaStats,
    PixelError, StatsParams,
};
pub use report::{merge_reports, FilterReport, StageCounts};
pub use stages::{check_mask_area, check_sync, evaluate_stage, face_mask_fraction, missing};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageName {
    AudioSync,
    CameraSuitability,
    TextVisualQuality,
    Duration,
    VisualDefects,
    MotionConsistency,
    MaskArea,
}

impl StageName {
    /// Execution order.
    pub const ORDER: [StageName; 7] = [
        StageName::AudioSync,
        StageName::CameraSuitability,
        StageName::TextVisualQuality,
        StageName::Duration,
        StageName::VisualDefects,
        StageName::MotionConsistency,
        StageName::MaskArea,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::AudioSync => "AudioSync",
            StageName::CameraSuitability => "CameraSuitability",
            StageName::TextVisualQuality => "TextVisualQuality",
            StageName::Duration => "Duration",
            StageName::VisualDefects => "VisualDefects",
            StageName::MotionConsistency => "MotionConsistency",
            StageName::MaskArea => "MaskArea",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValidateError {
    #[error("filter config incomplete: {stage}.{param} {problem}")]
    ConfigIncomplete { stage: StageName, param: &'static str, problem: String },
    #[error("clip references unknown video {0}")]
    UnknownVideo(String),
    #[error("report schema version {found} is incompatible with {expected}")]
    IncompatibleSchemaVersion { expected: u32, found: u32 },
    #[error("reports disagree on the stage list")]
    IncompatibleStages,
}
