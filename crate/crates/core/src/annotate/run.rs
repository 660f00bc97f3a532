use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::merge::{apply_partial, normalize_fields, Partial};
use super::{instantiate, AnnotatorError, AnnotatorSpec, Backend, FailureKind, TaskGraph};
use crate::model::{validate_record, VideoRecord, SCHEMA_VERSION};

/// Attempts per work item: the first try plus one retry after a timeout.
const MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub video_id: String,
    pub annotator: String,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Ok,
    Failed,
    Skipped,
}

/// Timing of one (record, annotator) work item, in microseconds since the run started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub video_id: String,
    pub annotator: String,
    pub status: TraceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub attempts: u32,
    pub start_us: u64,
    pub end_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub failures: Vec<Failure>,
    pub traces: Vec<Trace>,
}

/// Sends one request and checks the reply against the annotator's contract.
pub fn invoke_annotator(spec: &AnnotatorSpec, backend: &dyn Backend, record: &VideoRecord) -> Result<Partial, AnnotatorError> {
    let request = json!({ "schema_version": SCHEMA_VERSION, "annotator": spec.name, "record": record });
    let reply = backend.call(&request, Duration::from_secs_f64(spec.timeout_s))?;
    let malformed = |m: String| AnnotatorError::MalformedOutput(format!("{}: {m}", spec.name));
    let ok = reply.get("ok").and_then(Value::as_bool).ok_or_else(|| malformed("reply lacks boolean `ok`".into()))?;
    if !ok {
        let error = reply.get("error").and_then(Value::as_str).unwrap_or("unspecified error");
        return Err(AnnotatorError::BackendError(error.to_string()));
    }
    let Some(Value::Object(fields)) = reply.get("fields") else {
        return Err(malformed("reply lacks object `fields`".into()));
    };
    let mut fields: BTreeMap<String, Value> = fields.clone().into_iter().collect();
    if let Some(extra) = fields.keys().find(|k| !spec.produces.contains(k)) {
        return Err(malformed(format!("field {extra} is not declared in produces")));
    }
    normalize_fields(&mut fields, &spec.output_ranges)?;
    let partial = Partial { annotator: spec.name.clone(), fields };
    let mut probe = record.clone();
    match apply_partial(&mut probe, &partial) {
        Ok(()) => Ok(partial),
        Err(AnnotatorError::SchemaViolation(v)) => Err(malformed(v.iter().map(|x| x.message.clone()).collect::<Vec<_>>().join("; "))),
        Err(e) => Err(e),
    }
}

struct State {
    ready: VecDeque<(usize, usize)>,
    waiting_on: Vec<Vec<usize>>,
    results: Vec<Vec<Option<(Result<Partial, AnnotatorError>, u32)>>>,
    traces: Vec<(usize, usize, Trace)>,
    outstanding: usize,
}

/// Builds backends from the graph and runs it; see [`run_with_backends`].
pub fn run_offline_annotation(
    records: &[VideoRecord],
    graph: &TaskGraph,
    seed: u64,
    parallelism: usize,
) -> Result<(Vec<VideoRecord>, RunReport), AnnotatorError> {
    let backends = instantiate(graph, seed)?;
    Ok(run_with_backends(records, graph, &backends, parallelism))
}

/// Runs every (record, annotator) pair on a pool of `parallelism` workers.
///
/// An item becomes ready once all of its prerequisites for the same record
/// have finished; if any of them failed it is skipped. Outputs are merged
/// in topological order afterwards, so the result does not depend on scheduling.
pub fn run_with_backends(
    records: &[VideoRecord],
    graph: &TaskGraph,
    backends: &[Arc<dyn Backend>],
    parallelism: usize,
) -> (Vec<VideoRecord>, RunReport) {
    assert_eq!(backends.len(), graph.len(), "one backend per annotator");
    let n = graph.len();
    let total = records.len() * n;
    if total == 0 {
        return (records.to_vec(), RunReport::default());
    }
    let mut ready = VecDeque::new();
    for r in 0..records.len() {
        for &node in graph.topological_order() {
            if graph.prerequisites(node).is_empty() {
                ready.push_back((r, node));
            }
        }
    }
    let state = Mutex::new(State {
        ready,
        waiting_on: vec![(0..n).map(|i| graph.prerequisites(i).len()).collect(); records.len()],
        results: vec![vec![None; n]; records.len()],
        traces: Vec::with_capacity(total),
        outstanding: total,
    });
    let wake = Condvar::new();
    let clock = Instant::now();
    let micros = || clock.elapsed().as_micros() as u64;

    std::thread::scope(|scope| {
        for _ in 0..parallelism.max(1).min(total) {
            scope.spawn(|| loop {
                let item = {
                    let mut st = state.lock().expect("scheduler lock");
                    loop {
                        if let Some(item) = st.ready.pop_front() {
                            break Some(item);
                        }
                        if st.outstanding == 0 {
                            break None;
                        }
                        st = wake.wait(st).expect("scheduler lock");
                    }
                };
                let Some((r, node)) = item else { return };
                let spec = &graph.nodes[node];

                let (failed_dep, context) = {
                    let st = state.lock().expect("scheduler lock");
                    let failed = graph
                        .prerequisites(node)
                        .iter()
                        .find(|p| !matches!(st.results[r][**p], Some((Ok(_), _))))
                        .map(|p| graph.nodes[*p].name.clone());
                    let context: Vec<Partial> = graph
                        .ancestors(node)
                        .iter()
                        .filter_map(|a| match &st.results[r][*a] {
                            Some((Ok(p), _)) => Some(p.clone()),
                            _ => None,
                        })
                        .collect();
                    (failed, context)
                };

                let start_us = micros();
                let (result, attempts) = match failed_dep {
                    Some(dep) => (Err(AnnotatorError::DependencyFailed(dep)), 0),
                    None => {
                        let mut view = records[r].clone();
                        let prepared = context.iter().try_for_each(|p| apply_partial(&mut view, p));
                        match prepared {
                            Err(e) => (Err(e), 0),
                            Ok(()) => {
                                let mut attempt = 0;
                                loop {
                                    attempt += 1;
                                    match invoke_annotator(spec, backends[node].as_ref(), &view) {
                                        Err(AnnotatorError::Timeout(_)) if attempt < MAX_ATTEMPTS => continue,
                                        other => break (other, attempt),
                                    }
                                }
                            }
                        }
                    }
                };
                let end_us = micros();

                let mut st = state.lock().expect("scheduler lock");
                let (status, reason) = match &result {
                    Ok(_) => (TraceStatus::Ok, None),
                    Err(e @ AnnotatorError::DependencyFailed(_)) => (TraceStatus::Skipped, Some(e.to_string())),
                    Err(e) => (TraceStatus::Failed, Some(e.to_string())),
                };
                let trace = Trace {
                    video_id: records[r].video_id.clone(),
                    annotator: spec.name.clone(),
                    status,
                    reason,
                    attempts,
                    start_us,
                    end_us,
                };
                st.traces.push((r, node, trace));
                st.results[r][node] = Some((result, attempts));
                st.outstanding -= 1;
                for &d in graph.dependents(node) {
                    st.waiting_on[r][d] -= 1;
                    if st.waiting_on[r][d] == 0 {
                        st.ready.push_back((r, d));
                    }
                }
                drop(st);
                wake.notify_all();
            });
        }
    });

    let st = state.into_inner().expect("scheduler lock");
    let rank: Vec<usize> = {
        let mut rank = vec![0; n];
        for (pos, node) in graph.topological_order().iter().enumerate() {
            rank[*node] = pos;
        }
        rank
    };
    let mut traces = st.traces;
    traces.sort_by_key(|(r, node, _)| (*r, rank[*node]));

    let mut failures = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for (r, base) in records.iter().enumerate() {
        let mut merged = base.clone();
        for &node in graph.topological_order() {
            let (result, _) = st.results[r][node].as_ref().expect("every item completes");
            let fail = |e: &AnnotatorError| Failure {
                video_id: base.video_id.clone(),
                annotator: graph.nodes[node].name.clone(),
                kind: e.kind(),
                message: e.to_string(),
            };
            match result {
                Ok(partial) => {
                    let mut next = merged.clone();
                    let applied = apply_partial(&mut next, partial).and_then(|_| {
                        let v = validate_record(&next);
                        if v.is_empty() {
                            Ok(())
                        } else {
                            Err(AnnotatorError::SchemaViolation(v))
                        }
                    });
                    match applied {
                        Ok(()) => merged = next,
                        Err(e) => failures.push(fail(&e)),
                    }
                }
                Err(e) => failures.push(fail(e)),
            }
        }
        out.push(merged);
    }
    (out, RunReport { failures, traces: traces.into_iter().map(|(_, _, t)| t).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{build_task_graph, GraphSpec, MockBackend};
    use crate::jsonl::encode_lines;
    use crate::model::SourceCategory;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn records(n: usize) -> Vec<VideoRecord> {
        (0..n)
            .map(|i| VideoRecord::new(format!("r{i:03}"), SourceCategory::ALL[i % 6], 6.0 + i as f64, 25.0, 640, 360))
            .collect()
    }

    #[test]
    fn all_mock_run_is_parallelism_invariant() {
        let graph = build_task_graph(GraphSpec::default_graph(7).annotators).unwrap();
        let recs = records(10);
        let (base, report) = run_offline_annotation(&recs, &graph, 7, 1).unwrap();
        assert!(report.failures.is_empty(), "{:?}", report.failures);
        assert_eq!(base.len(), 10);
        assert!(base.iter().all(|r| r.annotations.sync.is_some() && r.annotations.face.is_some()));
        for p in [4, 16] {
            let (other, _) = run_offline_annotation(&recs, &graph, 7, p).unwrap();
            assert_eq!(encode_lines(&other), encode_lines(&base), "parallelism {p}");
        }
    }

    #[test]
    fn prerequisites_finish_before_dependents_start() {
        let graph = build_task_graph(GraphSpec::default_graph(1).annotators).unwrap();
        let (_, report) = run_offline_annotation(&records(12), &graph, 1, 8).unwrap();
        assert_eq!(report.traces.len(), 12 * 9);
        for t in &report.traces {
            let node = graph.index_of(&t.annotator).unwrap();
            for a in graph.ancestors(node) {
                let pre = report
                    .traces
                    .iter()
                    .find(|x| x.video_id == t.video_id && x.annotator == graph.nodes[a].name)
                    .unwrap();
                assert!(pre.end_us <= t.start_us, "{} before {}", pre.annotator, t.annotator);
            }
        }
    }

    #[test]
    fn empty_input() {
        let graph = build_task_graph(GraphSpec::default_graph(0).annotators).unwrap();
        let (out, report) = run_offline_annotation(&[], &graph, 0, 4).unwrap();
        assert!(out.is_empty());
        assert_eq!(report, RunReport::default());
    }

    /// Times out for one video, delegates to the mock otherwise.
    struct StallFor {
        inner: MockBackend,
        video: &'static str,
        calls: AtomicU32,
    }

    impl Backend for StallFor {
        fn call(&self, request: &Value, timeout: Duration) -> Result<Value, AnnotatorError> {
            if request["record"]["video_id"] == self.video {
                self.calls.fetch_add(1, Ordering::SeqCst);
                return Err(AnnotatorError::Timeout(timeout.as_secs_f64()));
            }
            self.inner.call(request, timeout)
        }
    }

    fn default_backends(graph: &TaskGraph, seed: u64) -> Vec<Arc<dyn Backend>> {
        instantiate(graph, seed).unwrap()
    }

    #[test]
    fn timeout_is_isolated_and_retried_once() {
        let graph = build_task_graph(GraphSpec::default_graph(3).annotators).unwrap();
        let mut backends = default_backends(&graph, 3);
        let stall = Arc::new(StallFor { inner: MockBackend::new("sync", 3).unwrap(), video: "r002", calls: AtomicU32::new(0) });
        backends[graph.index_of("sync").unwrap()] = stall.clone();
        let (out, report) = run_with_backends(&records(5), &graph, &backends, 4);
        assert_eq!(stall.calls.load(Ordering::SeqCst), 2);
        assert_eq!(report.failures.len(), 1);
        let f = &report.failures[0];
        assert_eq!((f.video_id.as_str(), f.annotator.as_str(), f.kind), ("r002", "sync", FailureKind::Timeout));
        let r2 = &out[2].annotations;
        assert!(r2.sync.is_none());
        assert!(r2.face.is_some() && r2.audio.is_some() && r2.camera.is_some());
        assert!(out.iter().enumerate().all(|(i, r)| i == 2 || r.annotations.sync.is_some()));
    }

    struct Reply(Value);

    impl Backend for Reply {
        fn call(&self, _: &Value, _: Duration) -> Result<Value, AnnotatorError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn failed_prerequisite_skips_dependents() {
        let graph = build_task_graph(GraphSpec::default_graph(0).annotators).unwrap();
        let mut backends = default_backends(&graph, 0);
        backends[graph.index_of("audio_extract").unwrap()] = Arc::new(Reply(json!({"ok": false, "error": "no audio stream"})));
        let (out, report) = run_with_backends(&records(2), &graph, &backends, 2);
        let kinds: Vec<(&str, FailureKind)> = report.failures.iter().filter(|f| f.video_id == "r000").map(|f| (f.annotator.as_str(), f.kind)).collect();
        assert_eq!(
            kinds,
            vec![("audio_extract", FailureKind::BackendError), ("vocal_separation", FailureKind::DependencyFailed), ("sync", FailureKind::DependencyFailed)]
        );
        assert!(out[0].annotations.face.is_some());
        assert!(report.traces.iter().any(|t| t.status == TraceStatus::Skipped && t.attempts == 0));
    }

    #[test]
    fn contract_violations_are_malformed() {
        let spec = AnnotatorSpec::builtin("quality", &["quality"], &[]);
        let rec = records(1).remove(0);
        let extra = Reply(json!({"ok": true, "fields": {"quality": {"perceptual_score": 0.5}, "face": {"person_count": 1}}}));
        assert!(matches!(invoke_annotator(&spec, &extra, &rec), Err(AnnotatorError::MalformedOutput(_))));
        let wrong_type = Reply(json!({"ok": true, "fields": {"quality": {"perceptual_score": "great"}}}));
        assert!(matches!(invoke_annotator(&spec, &wrong_type, &rec), Err(AnnotatorError::MalformedOutput(_))));
        let no_ok = Reply(json!({"fields": {}}));
        assert!(matches!(invoke_annotator(&spec, &no_ok, &rec), Err(AnnotatorError::MalformedOutput(_))));
    }

    #[test]
    fn output_ranges_normalize_backend_values() {
        let mut spec = AnnotatorSpec::builtin("sync", &["sync"], &[]);
        spec.output_ranges.insert("sync.sync_confidence".into(), (0.0, 100.0));
        let mut rec = records(1).remove(0);
        rec.annotations.audio = Some(crate::model::AudioAnnotation { has_speech: true, vocal_track_available: true, language: None });
        let backend = Reply(json!({"ok": true, "fields": {"sync": {"av_offset_ms": -20.0, "sync_confidence": 87}}}));
        let p = invoke_annotator(&spec, &backend, &rec).unwrap();
        assert_eq!(p.fields["sync"]["sync_confidence"], json!(0.87));
    }

    #[test]
    fn malformed_output_is_not_retried() {
        struct Count(AtomicU32);
        impl Backend for Count {
            fn call(&self, _: &Value, _: Duration) -> Result<Value, AnnotatorError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Ok(json!("nonsense"))
            }
        }
        let graph = build_task_graph(vec![AnnotatorSpec::builtin("face", &["face"], &[])]).unwrap();
        let counter = Arc::new(Count(AtomicU32::new(0)));
        let (_, report) = run_with_backends(&records(1), &graph, &[counter.clone()], 1);
        assert_eq!(counter.0.load(Ordering::SeqCst), 1);
        assert_eq!(report.failures[0].kind, FailureKind::MalformedOutput);
    }

    #[test]
    fn mock_face_declares_person_count() {
        let spec = AnnotatorSpec::builtin("face", &["face"], &[]);
        let rec = records(1).remove(0);
        let p = invoke_annotator(&spec, &MockBackend::new("face", 9).unwrap(), &rec).unwrap();
        let count = p.fields["face"]["person_count"].as_u64().unwrap();
        assert!((1..=2).contains(&count));
    }
}
