use std::collections::{BTreeSet, HashMap};

use super::{AnnotatorSpec, GraphError};
use crate::model::ANNOTATION_FIELDS;

fn sub_fields(field: &str) -> &'static [&'static str] {
    match field {
        "face" => &["boxes", "landmarks", "person_count", "head_pose"],
        "body" => &["composition", "hand_visible", "hand_visibility"],
        "audio" => &["has_speech", "vocal_track_available", "language"],
        "sync" => &["av_offset_ms", "sync_confidence"],
        "quality" => &["perceptual_score", "artifact_flags"],
        "camera" => &["camera_type", "camera_motion", "shot_size", "lens_type", "visual_style"],
        "motion" => &["motion_speed", "motion_intensity"],
        "captions" => &["detailed", "summary", "temporal_spans"],
        _ => &[],
    }
}

pub(crate) fn known_path(path: &str) -> bool {
    match path.split_once('.') {
        None => ANNOTATION_FIELDS.contains(&path),
        Some((top, rest)) => sub_fields(top).contains(&rest),
    }
}

/// Validated annotator DAG with a fixed topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    pub nodes: Vec<AnnotatorSpec>,
    /// `(prerequisite, dependent)` index pairs.
    pub edges: Vec<(usize, usize)>,
    order: Vec<usize>,
    depth: Vec<usize>,
    prereqs: Vec<Vec<usize>>,
    dependents: Vec<Vec<usize>>,
}

impl TaskGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node indices; every prerequisite precedes its dependents, ties broken by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn topological_names(&self) -> Vec<&str> {
        self.order.iter().map(|i| self.nodes[*i].name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Longest prerequisite chain below the node (0 for roots).
    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn prerequisites(&self, node: usize) -> &[usize] {
        &self.prereqs[node]
    }

    pub fn dependents(&self, node: usize) -> &[usize] {
        &self.dependents[node]
    }

    /// All transitive prerequisites, in topological order.
    pub fn ancestors(&self, node: usize) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = self.prereqs[node].clone();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(&self.prereqs[n]);
            }
        }
        self.order.iter().copied().filter(|n| seen.contains(n)).collect()
    }
}

fn find_cycle(remaining: &BTreeSet<usize>, prereqs: &[Vec<usize>]) -> Vec<usize> {
    let start = *remaining.iter().next().expect("cycle implies leftover nodes");
    let mut path = vec![start];
    let mut node = start;
    loop {
        let next = *prereqs[node].iter().filter(|p| remaining.contains(p)).min().expect("leftover nodes keep a leftover prerequisite");
        if let Some(pos) = path.iter().position(|n| *n == next) {
            return path[pos..].to_vec();
        }
        path.push(next);
        node = next;
    }
}

pub fn build_task_graph(specs: Vec<AnnotatorSpec>) -> Result<TaskGraph, GraphError> {
    if specs.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in specs.iter().enumerate() {
        if index.insert(s.name.as_str(), i).is_some() {
            return Err(GraphError::DuplicateName(s.name.clone()));
        }
        if s.produces.is_empty() {
            return Err(GraphError::EmptyProduces(s.name.clone()));
        }
        if let Some(f) = s.produces.iter().find(|f| !known_path(f)) {
            return Err(GraphError::UnknownField { annotator: s.name.clone(), field: f.clone() });
        }
        if !(s.timeout_s.is_finite() && s.timeout_s > 0.0) {
            return Err(GraphError::InvalidSpec { annotator: s.name.clone(), problem: format!("timeout_s must be positive, got {}", s.timeout_s) });
        }
        for (field, (lo, hi)) in &s.output_ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GraphError::InvalidSpec { annotator: s.name.clone(), problem: format!("output range for {field} must satisfy min < max") });
            }
        }
    }

    let n = specs.len();
    let mut prereqs = vec![Vec::new(); n];
    let mut dependents = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        for d in &s.depends_on {
            let j = *index.get(d.as_str()).ok_or_else(|| GraphError::UnknownDependency {
                annotator: s.name.clone(),
                dependency: d.clone(),
            })?;
            if !prereqs[i].contains(&j) {
                prereqs[i].push(j);
                dependents[j].push(i);
                edges.push((j, i));
            }
        }
    }

    // Kahn's algorithm, always taking the lowest ready index.
    let mut indegree: Vec<usize> = prereqs.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    let mut depth = vec![0usize; n];
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &d in &dependents[i] {
            depth[d] = depth[d].max(depth[i] + 1);
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.insert(d);
            }
        }
    }
    if order.len() < n {
        let placed: BTreeSet<usize> = order.iter().copied().collect();
        let remaining: BTreeSet<usize> = (0..n).filter(|i| !placed.contains(i)).collect();
        let cycle = find_cycle(&remaining, &prereqs);
        return Err(GraphError::CycleDetected(cycle.into_iter().map(|i| specs[i].name.clone()).collect()));
    }

    let graph = TaskGraph { nodes: specs, edges, order, depth, prereqs, dependents };
    check_overlaps(&graph)?;
    Ok(graph)
}

/// Two annotators may touch the same field only as parent and sub-field, and
/// only when the sub-field writer runs after the parent writer.
fn check_overlaps(g: &TaskGraph) -> Result<(), GraphError> {
    let writes: Vec<(usize, &str)> = g
        .nodes
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.produces.iter().map(move |p| (i, p.as_str())))
        .collect();
    for (a, (i, p)) in writes.iter().enumerate() {
        for (j, q) in &writes[a + 1..] {
            let overlap = |parent: &str, child: &str| child.strip_prefix(parent).is_some_and(|r| r.starts_with('.'));
            let err = || GraphError::OverlappingProduces {
                field: if p.len() <= q.len() { p.to_string() } else { q.to_string() },
                first: g.nodes[*i].name.clone(),
                second: g.nodes[*j].name.clone(),
            };
            if p == q {
                return Err(err());
            }
            if overlap(p, q) && !g.ancestors(*j).contains(i) {
                return Err(err());
            }
            if overlap(q, p) && !g.ancestors(*i).contains(j) {
                return Err(err());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::GraphSpec;

    fn spec(name: &str, produces: &str, deps: &[&str]) -> AnnotatorSpec {
        AnnotatorSpec::builtin(name, &[produces], deps)
    }

    #[test]
    fn default_graph_puts_sync_at_depth_two() {
        let g = build_task_graph(GraphSpec::default_graph(0).annotators).unwrap();
        assert_eq!(g.len(), 9);
        let sync = g.index_of("sync").unwrap();
        assert_eq!(g.depth(sync), 2);
        assert_eq!(g.depth(g.index_of("vocal_separation").unwrap()), 1);
        for name in ["face", "body", "quality", "camera", "motion", "caption", "audio_extract"] {
            assert_eq!(g.depth(g.index_of(name).unwrap()), 0, "{name}");
        }
        let names = g.topological_names();
        let pos = |n: &str| names.iter().position(|x| *x == n).unwrap();
        assert!(pos("audio_extract") < pos("vocal_separation") && pos("vocal_separation") < pos("sync"));
        assert_eq!(g.ancestors(sync), vec![g.index_of("audio_extract").unwrap(), g.index_of("vocal_separation").unwrap()]);
    }

    #[test]
    fn single_node() {
        let g = build_task_graph(vec![spec("face", "face", &[])]).unwrap();
        assert_eq!(g.topological_order(), &[0]);
    }

    #[test]
    fn two_cycle() {
        let r = build_task_graph(vec![spec("A", "face", &["B"]), spec("B", "body", &["A"])]);
        assert_eq!(r, Err(GraphError::CycleDetected(vec!["A".into(), "B".into()])));
    }

    #[test]
    fn longer_cycle_behind_a_root() {
        let r = build_task_graph(vec![
            spec("root", "face", &[]),
            spec("x", "body", &["z", "root"]),
            spec("y", "quality", &["x"]),
            spec("z", "camera", &["y"]),
        ]);
        assert_eq!(r, Err(GraphError::CycleDetected(vec!["x".into(), "z".into(), "y".into()])));
    }

    #[test]
    fn structural_errors() {
        assert_eq!(build_task_graph(vec![]), Err(GraphError::Empty));
        assert!(matches!(build_task_graph(vec![spec("a", "face", &["nope"])]), Err(GraphError::UnknownDependency { .. })));
        assert_eq!(
            build_task_graph(vec![spec("a", "face", &[]), spec("a", "body", &[])]),
            Err(GraphError::DuplicateName("a".into()))
        );
        assert!(matches!(build_task_graph(vec![spec("a", "face.smile", &[])]), Err(GraphError::UnknownField { .. })));
        let mut empty = spec("a", "face", &[]);
        empty.produces.clear();
        assert_eq!(build_task_graph(vec![empty]), Err(GraphError::EmptyProduces("a".into())));
    }

    #[test]
    fn overlapping_produces() {
        assert!(matches!(
            build_task_graph(vec![spec("a", "quality", &[]), spec("b", "quality", &[])]),
            Err(GraphError::OverlappingProduces { .. })
        ));
        // sub-field writer must come after the parent writer
        assert!(matches!(
            build_task_graph(vec![spec("a", "audio", &[]), spec("b", "audio.language", &[])]),
            Err(GraphError::OverlappingProduces { .. })
        ));
        assert!(build_task_graph(vec![spec("a", "audio", &[]), spec("b", "audio.language", &["a"])]).is_ok());
    }
}
