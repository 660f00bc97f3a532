use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SampleError;
use crate::model::{ClipWindow, VideoRecord};

/// Fields a predicate may reference. Derived fields (`face.max_abs_yaw`,
/// `sync.abs_offset_ms`, `captions.span_coverage`) are computed on the fly.
pub const KNOWN_FIELDS: [&str; 29] = [
    "source_category",
    "duration_s",
    "fps",
    "width",
    "height",
    "face",
    "face.person_count",
    "face.max_abs_yaw",
    "body",
    "body.composition",
    "body.hand_visibility",
    "audio",
    "audio.has_speech",
    "audio.vocal_track_available",
    "audio.language",
    "sync",
    "sync.av_offset_ms",
    "sync.abs_offset_ms",
    "sync.sync_confidence",
    "quality",
    "quality.perceptual_score",
    "camera",
    "camera.camera_type",
    "camera.camera_motion",
    "camera.shot_size",
    "motion",
    "motion.motion_speed",
    "motion.motion_intensity",
    "captions.span_coverage",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Exists,
    Absent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Predicate {
    pub field: String,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl Predicate {
    pub fn new(field: &str, op: Op, value: impl Into<Option<Value>>) -> Self {
        Self { field: field.to_string(), op, value: value.into() }
    }

    pub fn check(&self) -> Result<(), SampleError> {
        if !KNOWN_FIELDS.contains(&self.field.as_str()) {
            return Err(SampleError::UnknownField(self.field.clone()));
        }
        let needs_value = !matches!(self.op, Op::Exists | Op::Absent);
        let value_ok = match (&self.op, &self.value) {
            (Op::In, Some(Value::Array(_))) => true,
            (Op::In, _) => false,
            (Op::Lt | Op::Le | Op::Gt | Op::Ge, v) => v.as_ref().is_some_and(Value::is_number),
            (_, v) => v.is_some() == needs_value,
        };
        if value_ok {
            Ok(())
        } else {
            Err(SampleError::InvalidPredicate(format!("{} {:?} {:?}", self.field, self.op, self.value)))
        }
    }

    /// A missing field satisfies only `absent`.
    pub fn holds(&self, record: &VideoRecord, window: Option<&ClipWindow>) -> bool {
        let actual = field_value(record, window, &self.field);
        match (self.op, actual) {
            (Op::Exists, a) => a.is_some(),
            (Op::Absent, a) => a.is_none(),
            (_, None) => false,
            (op, Some(a)) => {
                let expected = self.value.as_ref();
                match op {
                    Op::Eq => expected.is_some_and(|e| values_equal(&a, e)),
                    Op::Ne => expected.is_some_and(|e| !values_equal(&a, e)),
                    Op::In => expected
                        .and_then(Value::as_array)
                        .is_some_and(|items| items.iter().any(|e| values_equal(&a, e))),
                    Op::Lt | Op::Le | Op::Gt | Op::Ge => match (a.as_f64(), expected.and_then(Value::as_f64)) {
                        (Some(x), Some(t)) => match op {
                            Op::Lt => x < t,
                            Op::Le => x <= t,
                            Op::Gt => x > t,
                            _ => x >= t,
                        },
                        _ => false,
                    },
                    Op::Exists | Op::Absent => unreachable!(),
                }
            }
        }
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn json<T: Serialize>(v: T) -> Option<Value> {
    serde_json::to_value(v).ok()
}

/// Fraction of `[start_s, end_s)` covered by the union of temporal spans.
pub fn window_span_coverage(record: &VideoRecord, start_s: f64, end_s: f64) -> f64 {
    let len = end_s - start_s;
    if len <= 0.0 {
        return 0.0;
    }
    let mut spans: Vec<(f64, f64)> = record
        .annotations
        .captions
        .temporal_spans
        .iter()
        .map(|s| (s.start_s.max(start_s), s.end_s.min(end_s)))
        .filter(|(a, b)| b > a)
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut covered = 0.0;
    let mut cursor = start_s;
    for (a, b) in spans {
        let a = a.max(cursor);
        if b > a {
            covered += b - a;
            cursor = b;
        }
    }
    (covered / len).clamp(0.0, 1.0)
}

/// Current value of `field`, or `None` when the annotation is absent.
pub fn field_value(record: &VideoRecord, window: Option<&ClipWindow>, field: &str) -> Option<Value> {
    let a = &record.annotations;
    match field {
        "source_category" => json(record.source_category),
        "duration_s" => json(record.duration_s),
        "fps" => json(record.fps),
        "width" => json(record.width),
        "height" => json(record.height),
        "face" => a.face.as_ref().and_then(json),
        "face.person_count" => a.face.as_ref().and_then(|f| json(f.person_count)),
        "face.max_abs_yaw" => a.face.as_ref().and_then(|f| f.max_abs_yaw()).and_then(json),
        "body" => a.body.as_ref().and_then(json),
        "body.composition" => a.body.as_ref().and_then(|b| json(b.composition)),
        "body.hand_visibility" => a.body.as_ref().and_then(|b| json(b.hand_visibility)),
        "audio" => a.audio.as_ref().and_then(json),
        "audio.has_speech" => a.audio.as_ref().and_then(|x| json(x.has_speech)),
        "audio.vocal_track_available" => a.audio.as_ref().and_then(|x| json(x.vocal_track_available)),
        "audio.language" => a.audio.as_ref().and_then(|x| x.language.as_ref()).and_then(json),
        "sync" => a.sync.as_ref().and_then(json),
        "sync.av_offset_ms" => a.sync.as_ref().and_then(|s| json(s.av_offset_ms)),
        "sync.abs_offset_ms" => a.sync.as_ref().and_then(|s| json(s.av_offset_ms.abs())),
        "sync.sync_confidence" => a.sync.as_ref().and_then(|s| json(s.sync_confidence)),
        "quality" => a.quality.as_ref().and_then(json),
        "quality.perceptual_score" => a.quality.as_ref().and_then(|q| json(q.perceptual_score)),
        "camera" => a.camera.as_ref().and_then(json),
        "camera.camera_type" => a.camera.as_ref().and_then(|c| json(c.camera_type)),
        "camera.camera_motion" => a.camera.as_ref().and_then(|c| c.camera_motion).and_then(json),
        "camera.shot_size" => a.camera.as_ref().and_then(|c| c.shot_size).and_then(json),
        "motion" => a.motion.as_ref().and_then(json),
        "motion.motion_speed" => a.motion.as_ref().and_then(|m| json(m.motion_speed)),
        "motion.motion_intensity" => a.motion.as_ref().and_then(|m| json(m.motion_intensity)),
        "captions.span_coverage" => {
            let (s, e) = window.map_or((0.0, record.duration_s), |w| (w.start_s(), w.end_s()));
            json(window_span_coverage(record, s, e))
        }
        _ => None,
    }
}
