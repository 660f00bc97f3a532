//! JSONL helpers: canonical single-line encoding and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl JsonlError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        JsonlError::Io { path: path.to_path_buf(), source }
    }
}

/// Recursively rebuilds objects with lexicographically sorted keys.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Serializes to one line of JSON with canonical key order.
///
/// Panics only if `T`'s `Serialize` impl fails, which none of the crate's
/// types do (all map keys are strings).
pub fn to_canonical_line<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&canonicalize(v)).expect("serializable value")
}

/// Pretty canonical JSON for single-document outputs such as reports.
pub fn to_canonical_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("serializable value");
    s.push('\n');
    s
}

/// Non-empty lines with their 1-based line numbers.
pub fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

pub fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, JsonlError> {
    lines(text)
        .map(|(line, l)| {
            serde_json::from_str(l).map_err(|e| JsonlError::Parse { line, message: e.to_string() })
        })
        .collect()
}

pub fn read_to_string(path: &Path) -> Result<String, JsonlError> {
    fs::read_to_string(path).map_err(|e| JsonlError::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    parse_lines(&read_to_string(path)?)
}

/// Encodes items as canonical JSONL (one line each, trailing newline).
pub fn encode_lines<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&to_canonical_line(item));
        out.push('\n');
    }
    out
}

/// Writes `bytes` to `path` via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), JsonlError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| JsonlError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| JsonlError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| JsonlError::io(path, e))?;
    tmp.persist(path).map_err(|e| JsonlError::io(path, e.error))?;
    Ok(())
}

/// Writes items as canonical JSONL and returns the number of lines written.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<usize, JsonlError> {
    write_atomic(path, encode_lines(items).as_bytes())?;
    Ok(items.len())
}
