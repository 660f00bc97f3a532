//! Unified annotation schema shared by every pipeline stage.
//!
//! A [`VideoRecord`] is one curated video plus all of its offline annotations.
//! Records travel between stages as JSONL, one record per line, with keys in
//! lexicographic order so equal records serialize to identical bytes.

mod record;
mod schema;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::multiperson::ConditionBinding;

pub use record::{parse_record, serialize_record, RecordError};
pub use schema::{duplicate_ids, validate_record, Violation};

/// Version stamped into every record, report and manifest line.
pub const SCHEMA_VERSION: u32 = 1;

fn schema_version_default() -> u32 {
    SCHEMA_VERSION
}

/// Functional source a raw video was collected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceCategory {
    CloseUpFace,
    Interview,
    ActedPerformance,
    Interaction,
    MusicVideo,
    AnimationStylized,
}

impl SourceCategory {
    pub const ALL: [SourceCategory; 6] = [
        SourceCategory::CloseUpFace,
        SourceCategory::Interview,
        SourceCategory::ActedPerformance,
        SourceCategory::Interaction,
        SourceCategory::MusicVideo,
        SourceCategory::AnimationStylized,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub video_id: String,
    pub source_category: SourceCategory,
    pub duration_s: f64,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub annotations: AnnotationSet,
    /// Unknown top-level keys, carried through untouched.
    #[serde(flatten)]
    pub extras: BTreeMap<String, Value>,
}

impl VideoRecord {
    /// A record with no annotations.
    pub fn new(
        video_id: impl Into<String>,
        source_category: SourceCategory,
        duration_s: f64,
        fps: f64,
        width: u32,
        height: u32,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            video_id: video_id.into(),
            source_category,
            duration_s,
            fps,
            width,
            height,
            annotations: AnnotationSet::default(),
            extras: BTreeMap::new(),
        }
    }

    /// Number of whole frames available in the video.
    pub fn frame_count(&self) -> u64 {
        frames_for(self.duration_s, self.fps)
    }
}

/// Whole frames in `duration_s` seconds at `fps`; tolerates float noise such
/// as `3.72 * 25.0 = 92.99999999999999`.
pub fn frames_for(duration_s: f64, fps: f64) -> u64 {
    let raw = duration_s * fps;
    if !raw.is_finite() || raw <= 0.0 {
        return 0;
    }
    (raw + 1e-6).floor() as u64
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<FaceAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<BodyAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<AudioAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sync: Option<SyncAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionAnnotation>,
    #[serde(default)]
    pub captions: CaptionSet,
}

/// Top-level annotation fields an annotator may produce.
pub const ANNOTATION_FIELDS: [&str; 8] = [
    "face", "body", "audio", "sync", "quality", "camera", "motion", "captions",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub frame: u64,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub frame: u64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceAnnotation {
    #[serde(default)]
    pub boxes: Vec<FaceBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<LandmarkSet>>,
    pub person_count: u32,
    #[serde(default)]
    pub head_pose: Vec<HeadPose>,
}

impl FaceAnnotation {
    /// Largest absolute yaw over all frames, if any pose was annotated.
    pub fn max_abs_yaw(&self) -> Option<f64> {
        self.head_pose
            .iter()
            .map(|p| p.yaw.abs())
            .fold(None, |acc, y| Some(acc.map_or(y, |a: f64| a.max(y))))
    }

    /// Maximum number of boxes sharing one frame.
    pub fn max_concurrent_boxes(&self) -> usize {
        let mut per_frame: BTreeMap<u64, usize> = BTreeMap::new();
        for b in &self.boxes {
            *per_frame.entry(b.frame).or_default() += 1;
        }
        per_frame.values().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Composition {
    Head,
    HalfBody,
    FullBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyAnnotation {
    pub composition: Composition,
    #[serde(default)]
    pub hand_visible: Vec<bool>,
    pub hand_visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioAnnotation {
    pub has_speech: bool,
    pub vocal_track_available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncAnnotation {
    pub av_offset_ms: f64,
    pub sync_confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArtifactFlag {
    TextCoverage,
    Border,
    BlackBorder,
    AbnormalBrightness,
    PixelDegradation,
    Subtitle,
    WhiteFlash,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAnnotation {
    pub perceptual_score: f64,
    #[serde(default)]
    pub artifact_flags: Vec<ArtifactFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraType {
    Static,
    Handheld,
    Tracking,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraMotion {
    None,
    Pan,
    Zoom,
    Track,
    Shake,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShotSize {
    CloseUp,
    Medium,
    Full,
    Wide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraAnnotation {
    pub camera_type: CameraType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_motion: Option<CameraMotion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_size: Option<ShotSize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lens_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_style: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionSpeed {
    Slow,
    Natural,
    Fast,
    Abnormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionAnnotation {
    pub motion_speed: MotionSpeed,
    pub motion_intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub caption: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaptionSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detailed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default)]
    pub temporal_spans: Vec<TemporalSpan>,
}

impl CaptionSet {
    /// Fraction of `[0, duration_s)` covered by the union of temporal spans.
    pub fn span_coverage(&self, duration_s: f64) -> f64 {
        if duration_s <= 0.0 {
            return 0.0;
        }
        let mut spans: Vec<(f64, f64)> = self
            .temporal_spans
            .iter()
            .map(|s| (s.start_s.max(0.0), s.end_s.min(duration_s)))
            .filter(|(a, b)| b > a)
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut cursor = f64::NEG_INFINITY;
        for (a, b) in spans {
            let a = a.max(cursor);
            if b > a {
                covered += b - a;
                cursor = b;
            }
        }
        (covered / duration_s).clamp(0.0, 1.0)
    }
}

/// A temporal window of a video, `end_frame` exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipWindow {
    pub video_id: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub fps: f64,
}

impl ClipWindow {
    pub fn len(&self) -> u64 {
        self.end_frame.saturating_sub(self.start_frame)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start_s(&self) -> f64 {
        self.start_frame as f64 / self.fps
    }

    pub fn end_s(&self) -> f64 {
        self.end_frame as f64 / self.fps
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fps
    }
}

/// Training objective a sample is selected for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskProfileKind {
    CloseUpFace,
    Body,
    ComplexScene,
    MusicInteraction,
    MultiPerson,
    Silent,
    Emotion,
}

/// Which caption source produced the text condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionSource {
    Span,
    Summary,
    Detailed,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    #[serde(default = "schema_version_default")]
    pub schema_version: u32,
    pub clip: ClipWindow,
    pub task_profile: TaskProfileKind,
    pub text_condition: String,
    pub caption_source: CaptionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<ConditionBinding>,
    /// Stage names traversed, ending with the accepting stage.
    pub provenance: Vec<String>,
}
