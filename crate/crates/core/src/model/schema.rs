use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{frames_for, AnnotationSet, CameraMotion, CameraType, VideoRecord, SCHEMA_VERSION};

/// One broken invariant, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn unit_interval(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Checks every schema invariant; an empty result means the record is valid.
pub fn validate_record(record: &VideoRecord) -> Vec<Violation> {
    let mut out = Vec::new();

    if record.schema_version != SCHEMA_VERSION {
        out.push(Violation::new(
            "schema_version",
            format!("unsupported schema_version {}", record.schema_version),
        ));
    }
    if record.video_id.is_empty() {
        out.push(Violation::new("video_id", "video_id must be non-empty"));
    }
    let duration_ok = record.duration_s.is_finite() && record.duration_s > 0.0;
    if !duration_ok {
        out.push(Violation::new("duration_s", "duration_s must be a positive number"));
    }
    let fps_ok = record.fps.is_finite() && record.fps > 0.0;
    if !fps_ok {
        out.push(Violation::new("fps", "fps must be a positive number"));
    }
    if duration_ok && fps_ok && frames_for(record.duration_s, record.fps) < 1 {
        out.push(Violation::new("duration_s", "video must contain at least one frame"));
    }
    if record.width == 0 {
        out.push(Violation::new("width", "width must be positive"));
    }
    if record.height == 0 {
        out.push(Violation::new("height", "height must be positive"));
    }

    check_annotations(record, &record.annotations, &mut out);
    out
}

fn check_annotations(record: &VideoRecord, ann: &AnnotationSet, out: &mut Vec<Violation>) {
    let (w, h) = (record.width as f64, record.height as f64);

    if let Some(face) = &ann.face {
        for (i, b) in face.boxes.iter().enumerate() {
            let path = format!("annotations.face.boxes[{i}]");
            let finite = [b.x, b.y, b.w, b.h].iter().all(|v| v.is_finite());
            if !finite || b.x < 0.0 || b.y < 0.0 || b.w < 0.0 || b.h < 0.0 || b.x + b.w > w || b.y + b.h > h
            {
                out.push(Violation::new(path.clone(), "face box lies outside the frame"));
            }
            if !unit_interval(b.confidence) {
                out.push(Violation::new(
                    format!("{path}.confidence"),
                    "detection confidence must lie in [0,1]",
                ));
            }
        }
        if (face.person_count as usize) < face.max_concurrent_boxes() {
            out.push(Violation::new(
                "annotations.face.person_count",
                "person_count is below the number of concurrent face boxes",
            ));
        }
        for (i, p) in face.head_pose.iter().enumerate() {
            if ![p.yaw, p.pitch, p.roll].iter().all(|v| v.is_finite()) {
                out.push(Violation::new(
                    format!("annotations.face.head_pose[{i}]"),
                    "head pose angles must be finite",
                ));
            }
        }
        if let Some(landmarks) = &face.landmarks {
            for (i, set) in landmarks.iter().enumerate() {
                if !set.points.iter().flatten().all(|v| v.is_finite()) {
                    out.push(Violation::new(
                        format!("annotations.face.landmarks[{i}]"),
                        "landmark coordinates must be finite",
                    ));
                }
            }
        }
    }

    if let Some(body) = &ann.body {
        if !unit_interval(body.hand_visibility) {
            out.push(Violation::new(
                "annotations.body.hand_visibility",
                "hand_visibility must lie in [0,1]",
            ));
        }
    }

    if let Some(audio) = &ann.audio {
        if audio.vocal_track_available && !audio.has_speech {
            out.push(Violation::new(
                "annotations.audio.vocal_track_available",
                "vocal track requires speech",
            ));
        }
    }

    if let Some(sync) = &ann.sync {
        if ann.audio.is_none() {
            out.push(Violation::new("annotations.sync", "sync requires audio"));
        }
        if !unit_interval(sync.sync_confidence) {
            out.push(Violation::new(
                "annotations.sync.sync_confidence",
                "sync_confidence must lie in [0,1]",
            ));
        }
        if !sync.av_offset_ms.is_finite() {
            out.push(Violation::new("annotations.sync.av_offset_ms", "offset must be finite"));
        }
    }

    if let Some(q) = &ann.quality {
        if !unit_interval(q.perceptual_score) {
            out.push(Violation::new(
                "annotations.quality.perceptual_score",
                "perceptual_score must lie in [0,1]",
            ));
        }
        let mut seen = BTreeSet::new();
        if !q.artifact_flags.iter().all(|f| seen.insert(*f)) {
            out.push(Violation::new(
                "annotations.quality.artifact_flags",
                "artifact flags must not repeat",
            ));
        }
    }

    if let Some(cam) = &ann.camera {
        if cam.camera_type == CameraType::Static
            && !matches!(cam.camera_motion, None | Some(CameraMotion::None))
        {
            out.push(Violation::new(
                "annotations.camera.camera_motion",
                "a static camera cannot move",
            ));
        }
    }

    if let Some(m) = &ann.motion {
        if !(m.motion_intensity.is_finite() && m.motion_intensity >= 0.0) {
            out.push(Violation::new(
                "annotations.motion.motion_intensity",
                "motion_intensity must be non-negative",
            ));
        }
    }

    for (i, span) in ann.captions.temporal_spans.iter().enumerate() {
        let ok = span.start_s.is_finite()
            && span.end_s.is_finite()
            && span.start_s >= 0.0
            && span.start_s < span.end_s
            && span.end_s <= record.duration_s;
        if !ok {
            out.push(Violation::new(
                format!("annotations.captions.temporal_spans[{i}]"),
                "span must satisfy 0 <= start < end <= duration",
            ));
        }
    }
}

/// Dataset-level check: every `video_id` appears once.
pub fn duplicate_ids<'a>(records: impl IntoIterator<Item = &'a VideoRecord>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut dups = BTreeSet::new();
    for r in records {
        if !seen.insert(r.video_id.as_str()) {
            dups.insert(r.video_id.clone());
        }
    }
    dups.into_iter().collect()
}
