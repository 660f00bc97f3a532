use std::path::Path;

use anyhow::{anyhow, Context};
use avatar_forge::jsonl;
use avatar_forge::model::{duplicate_ids, parse_record, validate_record};
use avatar_forge::VideoRecord;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Classify, CliError, CliResult};

/// Reads a records file; every line must parse and pass the schema checks.
pub fn read_records(path: &Path) -> CliResult<Vec<VideoRecord>> {
    let text = jsonl::read_to_string(path).input()?;
    let mut records = Vec::new();
    for (line, l) in jsonl::lines(&text) {
        let record = parse_record(l).map_err(|e| CliError::input(anyhow!("{}:{line}: {e}", path.display())))?;
        records.push(record);
    }
    let dups = duplicate_ids(&records);
    if !dups.is_empty() {
        return Err(CliError::input(anyhow!("{}: duplicate video_id {}", path.display(), dups.join(", "))));
    }
    Ok(records)
}

pub fn check_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a VideoRecord>) -> CliResult {
    for r in records {
        let v = validate_record(r);
        if let Some(first) = v.first() {
            return Err(CliError::input(anyhow!("{}: record {}: {first}", path.display(), r.video_id)));
        }
    }
    Ok(())
}

pub fn read_lines<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    jsonl::read_jsonl(path).with_context(|| path.display().to_string()).input()
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> CliResult<usize> {
    jsonl::write_jsonl(path, items).input()
}

/// Pretty canonical JSON document.
pub fn write_doc<T: Serialize>(path: &Path, value: &T) -> CliResult {
    jsonl::write_atomic(path, jsonl::to_canonical_pretty(value).as_bytes()).input()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = jsonl::read_to_string(path).input()?;
    serde_json::from_str(&text).with_context(|| path.display().to_string()).input()
}

/// TOML, or JSON when the extension says so. Failures are configuration errors.
pub fn read_config_file<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = jsonl::read_to_string(path).config()?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| path.display().to_string()).config()
    } else {
        toml::from_str(&text).with_context(|| path.display().to_string()).config()
    }
}

/// Refuses outputs that would overwrite one of the inputs.
pub fn ensure_distinct(inputs: &[&Path], outputs: &[&Path]) -> CliResult {
    for out in outputs {
        let Ok(out_real) = out.canonicalize() else { continue };
        for input in inputs {
            if input.canonicalize().is_ok_and(|p| p == out_real) {
                return Err(CliError::config(anyhow!("output {} would overwrite input {}", out.display(), input.display())));
            }
        }
    }
    Ok(())
}
