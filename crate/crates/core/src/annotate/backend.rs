use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use super::{AnnotatorError, BackendSpec, TaskGraph};
use crate::fixture;
use crate::model::VideoRecord;
use crate::seed::rng_for;

/// Sends one wire request and returns the raw reply object.
///
/// Implementations may be called from several workers at once; each
/// in-flight request must get its own connection or child process.
pub trait Backend: Send + Sync {
    fn call(&self, request: &Value, timeout: Duration) -> Result<Value, AnnotatorError>;
}

pub const MOCK_NAMES: [&str; 9] =
    ["face", "body", "quality", "camera", "motion", "caption", "audio_extract", "vocal_separation", "sync"];

/// Seeded stand-in for a real model; output depends only on the seed, the
/// mock name and the request record.
#[derive(Debug, Clone)]
pub struct MockBackend {
    mock: String,
    seed: u64,
}

impl MockBackend {
    pub fn new(mock: &str, seed: u64) -> Result<Self, AnnotatorError> {
        if MOCK_NAMES.contains(&mock) {
            Ok(Self { mock: mock.to_string(), seed })
        } else {
            Err(AnnotatorError::BackendUnavailable(format!("no builtin mock named {mock}")))
        }
    }

    fn fields(&self, rec: &VideoRecord) -> Result<Value, String> {
        let mut rng = rng_for(self.seed, &["mock", &self.mock, &rec.video_id]);
        let to = |v: Result<Value, serde_json::Error>| v.map_err(|e| e.to_string());
        Ok(match self.mock.as_str() {
            "face" => json!({ "face": to(serde_json::to_value(fixture::gen_face(&mut rng, rec)))? }),
            "body" => json!({ "body": to(serde_json::to_value(fixture::gen_body(&mut rng, rec)))? }),
            "quality" => json!({ "quality": to(serde_json::to_value(fixture::gen_quality(&mut rng)))? }),
            "camera" => json!({ "camera": to(serde_json::to_value(fixture::gen_camera(&mut rng)))? }),
            "motion" => json!({ "motion": to(serde_json::to_value(fixture::gen_motion(&mut rng)))? }),
            "caption" => json!({ "captions": to(serde_json::to_value(fixture::gen_captions(&mut rng, rec)))? }),
            "audio_extract" => json!({ "audio": to(serde_json::to_value(fixture::gen_audio(&mut rng)))? }),
            "vocal_separation" => {
                let audio = rec.annotations.audio.as_ref().ok_or("no extracted audio track")?;
                json!({ "audio.vocal_track_available": fixture::gen_vocal_track(&mut rng, audio) })
            }
            "sync" => {
                rec.annotations.audio.as_ref().ok_or("no extracted audio track")?;
                json!({ "sync": to(serde_json::to_value(fixture::gen_sync(&mut rng)))? })
            }
            other => return Err(format!("no builtin mock named {other}")),
        })
    }
}

impl Backend for MockBackend {
    fn call(&self, request: &Value, _timeout: Duration) -> Result<Value, AnnotatorError> {
        let record: VideoRecord = serde_json::from_value(request["record"].clone())
            .map_err(|e| AnnotatorError::MalformedOutput(format!("request record: {e}")))?;
        Ok(match self.fields(&record) {
            Ok(fields) => json!({ "ok": true, "fields": fields }),
            Err(error) => json!({ "ok": false, "error": error }),
        })
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Pool of persistent child processes speaking one JSON line per request.
pub struct SubprocessBackend {
    command: String,
    idle: Mutex<Vec<Worker>>,
}

impl SubprocessBackend {
    pub fn new(command: &str) -> Self {
        Self { command: command.to_string(), idle: Mutex::new(Vec::new()) }
    }

    fn spawn(&self) -> Result<Worker, AnnotatorError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AnnotatorError::BackendUnavailable(format!("cannot start `{}`: {e}", self.command)))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker { child, stdin, lines })
    }
}

impl Backend for SubprocessBackend {
    fn call(&self, request: &Value, timeout: Duration) -> Result<Value, AnnotatorError> {
        let idle = self.idle.lock().expect("pool lock").pop();
        let mut worker = match idle {
            Some(w) => w,
            None => self.spawn()?,
        };
        let line = serde_json::to_string(request).expect("request serializes");
        if let Err(e) = writeln!(worker.stdin, "{line}").and_then(|_| worker.stdin.flush()) {
            worker.kill();
            return Err(AnnotatorError::BackendUnavailable(format!("write to `{}` failed: {e}", self.command)));
        }
        match worker.lines.recv_timeout(timeout) {
            Ok(Ok(reply)) => {
                self.idle.lock().expect("pool lock").push(worker);
                serde_json::from_str(&reply).map_err(|e| AnnotatorError::MalformedOutput(format!("reply is not JSON: {e}")))
            }
            Ok(Err(e)) => {
                worker.kill();
                Err(AnnotatorError::BackendUnavailable(format!("read from `{}` failed: {e}", self.command)))
            }
            Err(RecvTimeoutError::Timeout) => {
                worker.kill();
                Err(AnnotatorError::Timeout(timeout.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => {
                worker.kill();
                Err(AnnotatorError::BackendUnavailable(format!("`{}` exited without replying", self.command)))
            }
        }
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        if let Ok(mut idle) = self.idle.lock() {
            for w in idle.drain(..) {
                w.kill();
            }
        }
    }
}

/// POSTs the request body as JSON and parses the reply body.
pub struct HttpBackend {
    endpoint: String,
}

impl HttpBackend {
    pub fn new(endpoint: &str) -> Self {
        Self { endpoint: endpoint.to_string() }
    }
}

impl Backend for HttpBackend {
    fn call(&self, request: &Value, timeout: Duration) -> Result<Value, AnnotatorError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let body = serde_json::to_string(request).expect("request serializes");
        let map_err = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => AnnotatorError::Timeout(timeout.as_secs_f64()),
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => AnnotatorError::Timeout(timeout.as_secs_f64()),
            ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
                AnnotatorError::BackendUnavailable(format!("{}: {e}", self.endpoint))
            }
            other => AnnotatorError::BackendError(format!("{}: {other}", self.endpoint)),
        };
        let mut response = agent
            .post(&self.endpoint)
            .header("content-type", "application/json")
            .send(body.as_str())
            .map_err(map_err)?;
        let status = response.status();
        let text = response.body_mut().read_to_string().map_err(map_err)?;
        if !status.is_success() {
            return Err(AnnotatorError::BackendError(format!("{} answered HTTP {status}", self.endpoint)));
        }
        serde_json::from_str(&text).map_err(|e| AnnotatorError::MalformedOutput(format!("reply is not JSON: {e}")))
    }
}

/// One backend per graph node, in node order.
pub fn instantiate(graph: &TaskGraph, graph_seed: u64) -> Result<Vec<Arc<dyn Backend>>, AnnotatorError> {
    graph
        .nodes
        .iter()
        .map(|spec| -> Result<Arc<dyn Backend>, AnnotatorError> {
            Ok(match &spec.backend {
                BackendSpec::Builtin { mock, seed } => Arc::new(MockBackend::new(mock, seed.unwrap_or(graph_seed))?),
                BackendSpec::Subprocess { command } => Arc::new(SubprocessBackend::new(command)),
                BackendSpec::Http { endpoint } => Arc::new(HttpBackend::new(endpoint)),
            })
        })
        .collect()
}
