//! Offline annotation: pluggable annotator backends run as a dependency DAG
//! over records, with their outputs merged into the unified schema.

mod backend;
mod graph;
mod merge;
mod run;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{instantiate, Backend, HttpBackend, MockBackend, SubprocessBackend, MOCK_NAMES};
pub use graph::{build_task_graph, TaskGraph};
pub use merge::{apply_partial, merge_annotations, normalize_fields, MergeError, Partial};
pub use run::{invoke_annotator, run_offline_annotation, run_with_backends, Failure, RunReport, Trace, TraceStatus};

use crate::model::Violation;

pub const DEFAULT_TIMEOUT_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Deterministic in-process generator; `seed` falls back to the graph seed.
    Builtin {
        mock: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Long-lived child process run through `sh -c`, one JSON line per request and reply.
    Subprocess { command: String },
    /// JSON POST of the same request body; the reply body is the same reply object.
    Http { endpoint: String },
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatorSpec {
    pub name: String,
    /// Annotation fields written: `face`, or a sub-field such as `audio.vocal_track_available`.
    pub produces: Vec<String>,
    #[serde(default)]
    pub depends_on: Vec<String>,
    pub backend: BackendSpec,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Raw value range per field path; values are mapped to `(v - min) / (max - min)`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub output_ranges: BTreeMap<String, (f64, f64)>,
}

impl AnnotatorSpec {
    pub fn builtin(name: &str, produces: &[&str], depends_on: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            produces: produces.iter().map(|s| s.to_string()).collect(),
            depends_on: depends_on.iter().map(|s| s.to_string()).collect(),
            backend: BackendSpec::Builtin { mock: name.to_string(), seed: None },
            timeout_s: DEFAULT_TIMEOUT_S,
            output_ranges: BTreeMap::new(),
        }
    }
}

/// An annotator graph file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default)]
    pub seed: u64,
    pub annotators: Vec<AnnotatorSpec>,
}

impl GraphSpec {
    /// Nine annotators: seven independent ones, then audio extraction ->
    /// vocal separation -> sync.
    pub fn default_graph(seed: u64) -> Self {
        let annotators = vec![
            AnnotatorSpec::builtin("face", &["face"], &[]),
            AnnotatorSpec::builtin("body", &["body"], &[]),
            AnnotatorSpec::builtin("quality", &["quality"], &[]),
            AnnotatorSpec::builtin("camera", &["camera"], &[]),
            AnnotatorSpec::builtin("motion", &["motion"], &[]),
            AnnotatorSpec::builtin("caption", &["captions"], &[]),
            AnnotatorSpec::builtin("audio_extract", &["audio"], &[]),
            AnnotatorSpec::builtin("vocal_separation", &["audio.vocal_track_available"], &["audio_extract"]),
            AnnotatorSpec::builtin("sync", &["sync"], &["vocal_separation"]),
        ];
        Self { seed, annotators }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("annotator graph is empty")]
    Empty,
    #[error("dependency cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("{annotator} depends on undeclared annotator {dependency}")]
    UnknownDependency { annotator: String, dependency: String },
    #[error("annotator name {0} declared twice")]
    DuplicateName(String),
    #[error("annotator {0} produces nothing")]
    EmptyProduces(String),
    #[error("{annotator} produces unknown field {field}")]
    UnknownField { annotator: String, field: String },
    #[error("{first} and {second} both write {field}")]
    OverlappingProduces { field: String, first: String, second: String },
    #[error("{annotator}: {problem}")]
    InvalidSpec { annotator: String, problem: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    Timeout,
    MalformedOutput,
    BackendUnavailable,
    BackendError,
    DependencyFailed,
    Conflict,
    SchemaViolation,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnnotatorError {
    #[error("timed out after {0} s")]
    Timeout(f64),
    #[error("malformed output: {0}")]
    MalformedOutput(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend reported: {0}")]
    BackendError(String),
    #[error("prerequisite {0} did not succeed")]
    DependencyFailed(String),
    #[error("merge conflict on {0}")]
    Conflict(String),
    #[error("schema violation: {}", .0.iter().map(|v| format!("{}: {}", v.path, v.message)).collect::<Vec<_>>().join("; "))]
    SchemaViolation(Vec<Violation>),
}

impl AnnotatorError {
    pub fn kind(&self) -> FailureKind {
        match self {
            AnnotatorError::Timeout(_) => FailureKind::Timeout,
            AnnotatorError::MalformedOutput(_) => FailureKind::MalformedOutput,
            AnnotatorError::BackendUnavailable(_) => FailureKind::BackendUnavailable,
            AnnotatorError::BackendError(_) => FailureKind::BackendError,
            AnnotatorError::DependencyFailed(_) => FailureKind::DependencyFailed,
            AnnotatorError::Conflict(_) => FailureKind::Conflict,
            AnnotatorError::SchemaViolation(_) => FailureKind::SchemaViolation,
        }
    }
}
