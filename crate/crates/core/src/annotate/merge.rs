use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::AnnotatorError;
use crate::model::{validate_record, AnnotationSet, VideoRecord, Violation};

pub type MergeError = AnnotatorError;

/// Fields one annotator produced for one record, keyed by produced path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partial {
    pub annotator: String,
    pub fields: BTreeMap<String, Value>,
}

fn malformed(msg: impl Into<String>) -> AnnotatorError {
    AnnotatorError::MalformedOutput(msg.into())
}

/// Maps each configured raw range onto `[0, 1]`. Range keys name either a
/// produced field or a path inside one (`sync.sync_confidence` within `sync`).
pub fn normalize_fields(fields: &mut BTreeMap<String, Value>, ranges: &BTreeMap<String, (f64, f64)>) -> Result<(), AnnotatorError> {
    for (path, (lo, hi)) in ranges {
        let Some((root, rest)) = fields
            .keys()
            .find_map(|k| if path == k { Some((k.clone(), "")) } else { path.strip_prefix(k.as_str()).and_then(|r| r.strip_prefix('.')).map(|r| (k.clone(), r)) })
        else {
            continue;
        };
        let pointer: String = rest.split('.').filter(|s| !s.is_empty()).map(|s| format!("/{s}")).collect();
        let Some(slot) = fields.get_mut(&root).and_then(|v| v.pointer_mut(&pointer)) else {
            continue;
        };
        match slot {
            Value::Null => {}
            Value::Number(n) => {
                let raw = n.as_f64().ok_or_else(|| malformed(format!("{path} is not a finite number")))?;
                let scaled = (raw - lo) / (hi - lo);
                *slot = serde_json::Number::from_f64(scaled).map(Value::Number).ok_or_else(|| malformed(format!("{path} normalizes to a non-finite value")))?;
            }
            other => return Err(malformed(format!("{path} must be numeric, got {other}"))),
        }
    }
    Ok(())
}

fn annotations_object(set: &AnnotationSet) -> Map<String, Value> {
    match serde_json::to_value(set).expect("annotation set serializes") {
        Value::Object(m) => m,
        _ => unreachable!("struct serializes to an object"),
    }
}

/// Writes one partial into `record`; a sub-field path needs its parent object.
pub fn apply_partial(record: &mut VideoRecord, partial: &Partial) -> Result<(), AnnotatorError> {
    let mut obj = annotations_object(&record.annotations);
    for (path, value) in &partial.fields {
        match path.split_once('.') {
            None => {
                obj.insert(path.clone(), value.clone());
            }
            Some((top, sub)) => match obj.get_mut(top) {
                Some(Value::Object(parent)) => {
                    parent.insert(sub.to_string(), value.clone());
                }
                _ => {
                    return Err(AnnotatorError::SchemaViolation(vec![Violation {
                        path: format!("annotations.{top}"),
                        message: format!("{} writes {path} but {top} is absent", partial.annotator),
                    }]))
                }
            },
        }
    }
    record.annotations = serde_json::from_value(Value::Object(obj)).map_err(|e| malformed(format!("{}: {e}", partial.annotator)))?;
    Ok(())
}

/// Applies `partials` in order and re-validates the result.
pub fn merge_annotations(record: &VideoRecord, partials: &[Partial]) -> Result<VideoRecord, MergeError> {
    let mut written: Vec<&str> = Vec::new();
    for p in partials {
        for path in p.fields.keys() {
            let clobbers = written.iter().any(|w| {
                w == path || w.strip_prefix(path.as_str()).is_some_and(|r| r.starts_with('.'))
            });
            if clobbers {
                return Err(AnnotatorError::Conflict(path.clone()));
            }
        }
        written.extend(p.fields.keys().map(String::as_str));
    }
    let mut out = record.clone();
    for p in partials {
        apply_partial(&mut out, p)?;
    }
    let violations = validate_record(&out);
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(AnnotatorError::SchemaViolation(violations))
    }
}
