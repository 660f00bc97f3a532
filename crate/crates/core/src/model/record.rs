use thiserror::Error;

use super::{validate_record, VideoRecord, Violation};
use crate::jsonl;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("schema violation: {}", join(.0))]
    SchemaViolation(Vec<Violation>),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl RecordError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            RecordError::SchemaViolation(v) => v,
            RecordError::MalformedRecord(_) => &[],
        }
    }
}

/// Parses one JSONL line into a schema-valid record.
pub fn parse_record(line: &str) -> Result<VideoRecord, RecordError> {
    let record: VideoRecord =
        serde_json::from_str(line).map_err(|e| RecordError::MalformedRecord(e.to_string()))?;
    let violations = validate_record(&record);
    if violations.is_empty() {
        Ok(record)
    } else {
        Err(RecordError::SchemaViolation(violations))
    }
}

/// Single-line canonical JSON (keys sorted, no trailing newline).
pub fn serialize_record(record: &VideoRecord) -> String {
    jsonl::to_canonical_line(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"{"video_id":"v1","source_category":"Interview","duration_s":10.0,"fps":25.0,"width":640,"height":480}"#;

    #[test]
    fn minimal_record_defaults() {
        let r = parse_record(MINIMAL).unwrap();
        assert_eq!(r.frame_count(), 250);
        assert_eq!(r.schema_version, 1);
        assert_eq!(r.annotations, AnnotationSet::default());
    }

    #[test]
    fn sync_without_audio_is_rejected() {
        let line = r#"{"video_id":"v1","source_category":"Interview","duration_s":10.0,"fps":25.0,"width":640,"height":480,"annotations":{"sync":{"av_offset_ms":0.0,"sync_confidence":0.9}}}"#;
        match parse_record(line) {
            Err(RecordError::SchemaViolation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].message, "sync requires audio");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_json_is_malformed() {
        assert!(matches!(parse_record("{not json"), Err(RecordError::MalformedRecord(_))));
        assert!(matches!(
            parse_record(r#"{"video_id":"v","source_category":"Podcast","duration_s":1,"fps":25,"width":1,"height":1}"#),
            Err(RecordError::MalformedRecord(_))
        ));
    }

    #[test]
    fn unknown_keys_survive_round_trip() {
        let line = r#"{"zeta":{"k":[1,2]},"video_id":"v1","source_category":"MusicVideo","duration_s":4.0,"fps":30.0,"width":64,"height":64,"alpha":"x"}"#;
        let r = parse_record(line).unwrap();
        assert_eq!(r.extras.len(), 2);
        let out = serialize_record(&r);
        assert!(out.starts_with(r#"{"alpha":"x","annotations":"#));
        assert_eq!(parse_record(&out).unwrap(), r);
    }

    #[test]
    fn serialization_is_single_line_and_canonical() {
        let mut r = parse_record(MINIMAL).unwrap();
        r.annotations.captions.detailed = Some("line one\nline two".into());
        let a = serialize_record(&r);
        let b = serialize_record(&r.clone());
        assert_eq!(a, b);
        assert!(!a.contains('\n'));
        let keys: Vec<&str> = ["\"annotations\"", "\"duration_s\"", "\"fps\"", "\"height\"", "\"schema_version\"", "\"source_category\"", "\"video_id\"", "\"width\""]
            .to_vec();
        let mut last = 0;
        for k in keys {
            let pos = a.find(k).unwrap();
            assert!(pos >= last, "{k} out of order in {a}");
            last = pos;
        }
    }

    prop_compose! {
        fn arb_record()(
            cat in 0usize..6,
            duration in 0.5f64..600.0,
            fps in prop::sample::select(vec![24.0, 25.0, 29.97, 30.0, 50.0]),
            conf in 0.0f64..=1.0,
            offset in -500.0f64..500.0,
            score in 0.0f64..=1.0,
            has_audio in any::<bool>(),
            has_sync in any::<bool>(),
            summary in proptest::option::of("[a-z \"\\\\\n]{0,20}"),
            span_frac in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 0..4),
            extra in proptest::option::of(any::<i32>()),
        ) -> VideoRecord {
            let mut r = VideoRecord::new(format!("vid-{cat}-{}", (duration * 1000.0) as u64),
                SourceCategory::ALL[cat], duration, fps, 1280, 720);
            if has_audio {
                r.annotations.audio = Some(AudioAnnotation { has_speech: true, vocal_track_available: true, language: Some("en".into()) });
                if has_sync {
                    r.annotations.sync = Some(SyncAnnotation { av_offset_ms: offset, sync_confidence: conf });
                }
            }
            r.annotations.quality = Some(QualityAnnotation { perceptual_score: score, artifact_flags: vec![ArtifactFlag::Subtitle] });
            r.annotations.captions.summary = summary;
            r.annotations.captions.temporal_spans = span_frac.into_iter().map(|(a, b)| {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let start = lo * duration;
                let end = (hi * duration).max(start + 1e-3).min(duration);
                TemporalSpan { start_s: start.min(end - 1e-6), end_s: end, caption: format!("{start:.3}") }
            }).collect();
            if let Some(x) = extra {
                r.extras.insert("extra".into(), serde_json::json!(x));
            }
            r
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn parse_serialize_round_trip(r in arb_record()) {
            prop_assume!(validate_record(&r).is_empty());
            let line = serialize_record(&r);
            prop_assert!(!line.contains('\n'));
            let back = parse_record(&line).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(serialize_record(&back), line);
        }
    }
}
