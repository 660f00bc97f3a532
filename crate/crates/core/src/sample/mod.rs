//! Task-specific selection and training-sample construction.

mod predicate;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub use predicate::{field_value, window_span_coverage, Op, Predicate, KNOWN_FIELDS};

use crate::jsonl::{self, JsonlError};
use crate::model::{CameraAnnotation, CaptionSet, CaptionSource, ClipWindow, TaskProfileKind, TrainingSample, VideoRecord, SCHEMA_VERSION};
use crate::seed::rng_for;
use crate::validate::AcceptedClip;

pub const DEFAULT_SAMPLE_FRAMES: u64 = 93;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("unknown field `{0}` in task predicate")]
    UnknownField(String),
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("unknown task profile `{0}`")]
    UnknownProfile(String),
    #[error("video {video_id} has {available} frames, window needs {needed}")]
    TooShort { video_id: String, available: u64, needed: u64 },
    #[error("window length must be positive")]
    EmptyWindow,
    #[error(transparent)]
    Io(#[from] JsonlError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskProfile {
    pub name: TaskProfileKind,
    #[serde(default)]
    pub predicates: Vec<Predicate>,
}

impl TaskProfile {
    pub fn check(&self) -> Result<(), SampleError> {
        self.predicates.iter().try_for_each(Predicate::check)
    }

    pub fn matches(&self, record: &VideoRecord, window: Option<&ClipWindow>) -> bool {
        self.predicates.iter().all(|p| p.holds(record, window))
    }
}

/// Named profiles, as loaded from a profiles file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSet {
    pub profiles: BTreeMap<String, TaskProfile>,
}

impl ProfileSet {
    pub fn check(&self) -> Result<(), SampleError> {
        self.profiles.values().try_for_each(TaskProfile::check)
    }

    pub fn get(&self, key: &str) -> Result<&TaskProfile, SampleError> {
        self.profiles.get(key).ok_or_else(|| SampleError::UnknownProfile(key.to_string()))
    }
}

impl Default for ProfileSet {
    fn default() -> Self {
        let closeup = TaskProfile {
            name: TaskProfileKind::CloseUpFace,
            predicates: vec![
                Predicate::new("face", Op::Exists, None),
                Predicate::new("face.max_abs_yaw", Op::Le, json!(30.0)),
                Predicate::new("sync.abs_offset_ms", Op::Le, json!(120.0)),
                Predicate::new("sync.sync_confidence", Op::Ge, json!(0.5)),
            ],
        };
        let body = TaskProfile {
            name: TaskProfileKind::Body,
            predicates: vec![
                Predicate::new("body.composition", Op::In, json!(["HalfBody", "FullBody"])),
                Predicate::new("body.hand_visibility", Op::Ge, json!(0.5)),
                Predicate::new("camera.camera_type", Op::Eq, json!("Static")),
            ],
        };
        let complex = TaskProfile {
            name: TaskProfileKind::ComplexScene,
            predicates: vec![
                Predicate::new("captions.span_coverage", Op::Ge, json!(0.8)),
                Predicate::new("quality.perceptual_score", Op::Ge, json!(0.5)),
            ],
        };
        let music = TaskProfile {
            name: TaskProfileKind::MusicInteraction,
            predicates: vec![Predicate::new("source_category", Op::In, json!(["MusicVideo", "Interaction"]))],
        };
        Self {
            profiles: [("closeup", closeup), ("body", body), ("complex", complex), ("music", music)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        }
    }
}

pub fn select_task_subset(records: &[VideoRecord], profile: &TaskProfile) -> Result<Vec<VideoRecord>, SampleError> {
    profile.check()?;
    Ok(records.iter().filter(|r| profile.matches(r, None)).cloned().collect())
}

fn draw_window(video_id: &str, lo: u64, hi: u64, length: u64, fps: f64, labels: &[&str], seed: u64) -> Result<ClipWindow, SampleError> {
    if length == 0 {
        return Err(SampleError::EmptyWindow);
    }
    let available = hi.saturating_sub(lo);
    if available < length {
        return Err(SampleError::TooShort { video_id: video_id.to_string(), available, needed: length });
    }
    let start = lo + rng_for(seed, labels).random_range(0..=available - length);
    Ok(ClipWindow { video_id: video_id.to_string(), start_frame: start, end_frame: start + length, fps })
}

/// Uniform window over the whole video; the stream depends only on `(seed, video_id)`.
pub fn sample_window(record: &VideoRecord, length_frames: u64, seed: u64) -> Result<ClipWindow, SampleError> {
    let id = record.video_id.as_str();
    draw_window(id, 0, record.frame_count(), length_frames, record.fps, &["sample_window", id], seed)
}

/// Uniform window inside an already validated clip.
pub fn sample_window_in_clip(clip: &ClipWindow, length_frames: u64, seed: u64) -> Result<ClipWindow, SampleError> {
    let (start, end) = (clip.start_frame.to_string(), clip.end_frame.to_string());
    let labels = ["sample_window", clip.video_id.as_str(), start.as_str(), end.as_str()];
    draw_window(&clip.video_id, clip.start_frame, clip.end_frame, length_frames, clip.fps, &labels, seed)
}

/// Best local description for `window`: the span with the largest positive
/// overlap (earliest start wins ties), then summary, then detailed caption.
pub fn select_local_caption(captions: &CaptionSet, window: &ClipWindow) -> (String, CaptionSource) {
    let (ws, we) = (window.start_s(), window.end_s());
    let mut best: Option<(f64, f64, usize)> = None;
    for (i, span) in captions.temporal_spans.iter().enumerate() {
        let overlap = span.end_s.min(we) - span.start_s.max(ws);
        if overlap <= 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((o, s, _)) => overlap > o || (overlap == o && span.start_s < s),
        };
        if better {
            best = Some((overlap, span.start_s, i));
        }
    }
    if let Some((_, _, i)) = best {
        return (captions.temporal_spans[i].caption.clone(), CaptionSource::Span);
    }
    if let Some(s) = &captions.summary {
        return (s.clone(), CaptionSource::Summary);
    }
    if let Some(d) = &captions.detailed {
        return (d.clone(), CaptionSource::Detailed);
    }
    (String::new(), CaptionSource::None)
}

/// `{caption} [camera: M; shot: S; lens: L] [style: X]`, dropping absent
/// fields and any bracket group left empty.
pub fn compose_condition(caption: &str, camera: Option<&CameraAnnotation>, style: Option<&str>) -> String {
    let mut parts: Vec<String> = Vec::new();
    if !caption.is_empty() {
        parts.push(caption.to_string());
    }
    if let Some(cam) = camera {
        let fields: Vec<String> = [
            cam.camera_motion.map(|m| format!("camera: {m:?}")),
            cam.shot_size.map(|s| format!("shot: {s:?}")),
            cam.lens_type.as_ref().map(|l| format!("lens: {l}")),
        ]
        .into_iter()
        .flatten()
        .collect();
        if !fields.is_empty() {
            parts.push(format!("[{}]", fields.join("; ")));
        }
    }
    if let Some(style) = style {
        parts.push(format!("[style: {style}]"));
    }
    parts.join(" ")
}

/// Writes one canonical JSON line per sample, in input order.
pub fn emit_manifest(samples: &[TrainingSample], path: &Path) -> Result<usize, SampleError> {
    Ok(jsonl::write_jsonl(path, samples)?)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    pub considered: u64,
    pub selected: u64,
    pub too_short: u64,
}

fn audio_ref(record: &VideoRecord) -> Option<String> {
    let audio = record.annotations.audio.as_ref()?;
    if audio.vocal_track_available {
        Some(format!("{}#vocals", record.video_id))
    } else if audio.has_speech {
        Some(format!("{}#audio", record.video_id))
    } else {
        None
    }
}

/// Turns accepted clips into training samples for one profile.
pub fn build_samples(
    accepted: &[AcceptedClip],
    profile: &TaskProfile,
    length_frames: u64,
    seed: u64,
) -> Result<(Vec<TrainingSample>, SampleStats), SampleError> {
    profile.check()?;
    let mut stats = SampleStats::default();
    let mut samples = Vec::new();
    for a in accepted {
        stats.considered += 1;
        let window = match sample_window_in_clip(&a.clip, length_frames, seed) {
            Ok(w) => w,
            Err(SampleError::TooShort { .. }) => {
                stats.too_short += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if !profile.matches(&a.record, Some(&window)) {
            continue;
        }
        let (caption, caption_source) = select_local_caption(&a.record.annotations.captions, &window);
        let camera = a.record.annotations.camera.as_ref();
        let text_condition = compose_condition(&caption, camera, camera.and_then(|c| c.visual_style.as_deref()));
        let mut provenance = a.provenance.clone();
        provenance.push(format!("TaskSelection:{:?}", profile.name));
        samples.push(TrainingSample {
            schema_version: SCHEMA_VERSION,
            clip: window,
            task_profile: profile.name,
            text_condition,
            caption_source,
            audio_ref: audio_ref(&a.record),
            binding: None,
            provenance,
        });
        stats.selected += 1;
    }
    Ok((samples, stats))
}
