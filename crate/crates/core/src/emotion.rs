//! Emotion-data filtering and labelling.
//!
//! Per video: hard exclusions assign category 0; otherwise the tagger's
//! candidate categories are resolved by a fixed priority, frame-level class
//! confidences are scored by top-N averaging with neutral-bias correction, and
//! the score is thresholded (strictly) to decide retention.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NEUTRAL: &str = "Neutral";
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_MIN_AREA_FRACTION: f64 = 0.10;

/// Categories from highest to lowest priority.
pub const PRIORITY_ORDER: [u8; 6] = [6, 5, 4, 2, 1, 3];

#[derive(Debug, Error, PartialEq)]
pub enum EmotionError {
    #[error("emotion category {0} outside 0..=6")]
    InvalidCategory(u8),
    #[error("no candidate categories")]
    EmptyCandidates,
    #[error("candidate category {0} is not one of 1..=6")]
    InvalidCandidate(u8),
    #[error("emotion matrix needs at least one frame and two classes, got {frames}x{classes}")]
    MatrixShape { frames: usize, classes: usize },
    #[error("class list has {names} names for {classes} columns")]
    ClassCount { names: usize, classes: usize },
    #[error("class list lacks \"Neutral\"")]
    MissingNeutral,
    #[error("confidence at frame {frame}, class {class} outside [0,1]")]
    ConfidenceRange { frame: usize, class: usize },
    #[error("top-N must be at least 1")]
    ZeroTopN,
    #[error("all motion dimensions are empty")]
    AllMotionEmpty,
}

/// 0 marks an excluded video; 1..=6 are the taxonomy categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct EmotionCategory(u8);

impl EmotionCategory {
    pub const EXCLUDED: EmotionCategory = EmotionCategory(0);

    pub fn new(value: u8) -> Result<Self, EmotionError> {
        if value <= 6 {
            Ok(Self(value))
        } else {
            Err(EmotionError::InvalidCategory(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Position in [`PRIORITY_ORDER`], 0 being the most important; `None` for 0.
    pub fn priority_rank(self) -> Option<usize> {
        PRIORITY_ORDER.iter().position(|c| *c == self.0)
    }
}

impl TryFrom<u8> for EmotionCategory {
    type Error = EmotionError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<EmotionCategory> for u8 {
    fn from(c: EmotionCategory) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExclusionFlags {
    pub synthetic: bool,
    pub subject_count: u32,
    pub identity_switch: bool,
    pub subject_area_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionDecision {
    Keep,
    Exclude,
}

pub fn apply_hard_exclusions(flags: &ExclusionFlags, min_area_fraction: f64) -> ExclusionDecision {
    let exclude = flags.synthetic
        || flags.subject_count > 2
        || flags.identity_switch
        || flags.subject_area_fraction < min_area_fraction;
    if exclude {
        ExclusionDecision::Exclude
    } else {
        ExclusionDecision::Keep
    }
}

/// Highest-priority candidate under `6 > 5 > 4 > 2 > 1 > 3`.
pub fn assign_priority_category(candidates: &[u8]) -> Result<EmotionCategory, EmotionError> {
    if candidates.is_empty() {
        return Err(EmotionError::EmptyCandidates);
    }
    if let Some(bad) = candidates.iter().find(|c| !(1..=6).contains(*c)) {
        return Err(EmotionError::InvalidCandidate(*bad));
    }
    let best = PRIORITY_ORDER
        .iter()
        .find(|c| candidates.contains(c))
        .expect("candidates are within 1..=6");
    Ok(EmotionCategory(*best))
}

/// Frame-level class confidences, `frames x classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmotionMatrix {
    class_names: Vec<String>,
    scores: Array2<f64>,
    neutral: usize,
}

impl FrameEmotionMatrix {
    pub fn new(class_names: Vec<String>, scores: Array2<f64>) -> Result<Self, EmotionError> {
        let (frames, classes) = scores.dim();
        if frames < 1 || classes < 2 {
            return Err(EmotionError::MatrixShape { frames, classes });
        }
        if class_names.len() != classes {
            return Err(EmotionError::ClassCount { names: class_names.len(), classes });
        }
        let neutral = class_names.iter().position(|c| c == NEUTRAL).ok_or(EmotionError::MissingNeutral)?;
        if let Some(((frame, class), _)) = scores.indexed_iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(EmotionError::ConfidenceRange { frame, class });
        }
        Ok(Self { class_names, scores, neutral })
    }

    /// Builds from per-frame rows.
    pub fn from_rows(class_names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self, EmotionError> {
        let classes = class_names.len();
        if rows.iter().any(|r| r.len() != classes) {
            let bad = rows.iter().find(|r| r.len() != classes).map_or(0, |r| r.len());
            return Err(EmotionError::ClassCount { names: classes, classes: bad });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let scores = Array2::from_shape_vec((rows.len(), classes), flat)
            .map_err(|_| EmotionError::MatrixShape { frames: rows.len(), classes })?;
        Self::new(class_names, scores)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn frames(&self) -> usize {
        self.scores.nrows()
    }

    /// Mean of the `n` largest confidences of each class column (all frames if `n > F`).
    pub fn top_n_means(&self, n: usize) -> Vec<f64> {
        let take = n.min(self.frames()).max(1);
        self.scores
            .columns()
            .into_iter()
            .map(|col| {
                let mut v: Vec<f64> = col.to_vec();
                v.sort_by(|a, b| b.total_cmp(a));
                v[..take].iter().sum::<f64>() / take as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScore {
    pub class_index: usize,
    pub class_name: String,
    pub score: f64,
}

/// First index of the maximum, skipping `skip`.
fn argmax(values: &[f64], skip: Option<usize>) -> usize {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best.expect("at least two classes")
}

/// Dominant class by top-N averaging; a Neutral winner is replaced by the runner-up.
pub fn score_emotion(matrix: &FrameEmotionMatrix, n: usize) -> Result<EmotionScore, EmotionError> {
    if n == 0 {
        return Err(EmotionError::ZeroTopN);
    }
    let scores = matrix.top_n_means(n);
    let mut best = argmax(&scores, None);
    if best == matrix.neutral {
        best = argmax(&scores, Some(matrix.neutral));
    }
    Ok(EmotionScore {
        class_index: best,
        class_name: matrix.class_names[best].clone(),
        score: scores[best],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionVerdict {
    pub category: EmotionCategory,
    pub dominant_class: String,
    pub score: f64,
    pub retained: bool,
    pub reclassified_nonemotional: bool,
    pub priority: bool,
}

/// Retains strictly above `threshold`; unretained 5/6 become non-emotional; category 1 is prioritised.
pub fn threshold_verdict(category: EmotionCategory, class: &str, score: f64, threshold: f64) -> EmotionVerdict {
    let retained = category != EmotionCategory::EXCLUDED && score > threshold;
    EmotionVerdict {
        category,
        dominant_class: class.to_string(),
        score,
        retained,
        reclassified_nonemotional: !retained && matches!(category.value(), 5 | 6),
        priority: category.value() == 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionConfig {
    pub top_n: usize,
    pub threshold: f64,
    pub min_area_fraction: f64,
}

impl Default for EmotionConfig {
    fn default() -> Self {
        Self { top_n: DEFAULT_TOP_N, threshold: DEFAULT_THRESHOLD, min_area_fraction: DEFAULT_MIN_AREA_FRACTION }
    }
}

/// Full per-video decision: exclusions, priority, scoring, threshold.
pub fn evaluate_video(
    flags: &ExclusionFlags,
    candidates: &[u8],
    matrix: &FrameEmotionMatrix,
    cfg: &EmotionConfig,
) -> Result<EmotionVerdict, EmotionError> {
    let scored = score_emotion(matrix, cfg.top_n)?;
    let category = match apply_hard_exclusions(flags, cfg.min_area_fraction) {
        ExclusionDecision::Exclude => EmotionCategory::EXCLUDED,
        ExclusionDecision::Keep => assign_priority_category(candidates)?,
    };
    Ok(threshold_verdict(category, &scored.class_name, scored.score, cfg.threshold))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneContext {
    #[serde(default)]
    pub environment: Option<String>,
    #[serde(default)]
    pub relationships: Option<String>,
    #[serde(default)]
    pub plot: Option<String>,
}

/// Observed movements per body region, in chronological order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionTimeline {
    #[serde(default)]
    pub facial: Vec<String>,
    #[serde(default)]
    pub head: Vec<String>,
    #[serde(default)]
    pub body: Vec<String>,
}

fn present(s: &Option<String>) -> Option<&str> {
    s.as_deref().map(str::trim).filter(|s| !s.is_empty())
}

/// Structured caption with `Context:` and `Motion:` sections; empty sub-fields are omitted.
pub fn compose_emotion_caption(context: &SceneContext, motion: &MotionTimeline) -> Result<String, EmotionError> {
    let motion_parts: Vec<(&str, &Vec<String>)> = [("Facial", &motion.facial), ("Head", &motion.head), ("Body", &motion.body)]
        .into_iter()
        .filter(|(_, v)| v.iter().any(|s| !s.trim().is_empty()))
        .collect();
    if motion_parts.is_empty() {
        return Err(EmotionError::AllMotionEmpty);
    }
    let mut lines = Vec::new();
    let context_parts: Vec<(&str, &str)> = [
        ("Environment", present(&context.environment)),
        ("Relationships", present(&context.relationships)),
        ("Plot", present(&context.plot)),
    ]
    .into_iter()
    .filter_map(|(label, v)| v.map(|v| (label, v)))
    .collect();
    if !context_parts.is_empty() {
        lines.push("Context:".to_string());
        lines.extend(context_parts.iter().map(|(label, v)| format!("  {label}: {v}")));
    }
    lines.push("Motion:".to_string());
    for (label, steps) in motion_parts {
        let steps: Vec<&str> = steps.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
        lines.push(format!("  {label}: {}", steps.join("; then ")));
    }
    Ok(lines.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn flags() -> ExclusionFlags {
        ExclusionFlags { synthetic: false, subject_count: 1, identity_switch: false, subject_area_fraction: 0.4 }
    }

    #[test]
    fn exclusions() {
        assert_eq!(apply_hard_exclusions(&flags(), 0.1), ExclusionDecision::Keep);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { subject_count: 3, ..flags() }, 0.1), ExclusionDecision::Exclude);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { subject_count: 2, ..flags() }, 0.1), ExclusionDecision::Keep);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { synthetic: true, ..flags() }, 0.0), ExclusionDecision::Exclude);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { identity_switch: true, ..flags() }, 0.1), ExclusionDecision::Exclude);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { subject_area_fraction: 0.05, ..flags() }, 0.1), ExclusionDecision::Exclude);
        assert_eq!(apply_hard_exclusions(&ExclusionFlags { subject_area_fraction: 0.1, ..flags() }, 0.1), ExclusionDecision::Keep);
    }

    #[test]
    fn priority_examples() {
        assert_eq!(assign_priority_category(&[1, 3]).unwrap().value(), 1);
        assert_eq!(assign_priority_category(&[2, 4]).unwrap().value(), 4);
        assert_eq!(assign_priority_category(&[3]).unwrap().value(), 3);
        assert_eq!(assign_priority_category(&[]), Err(EmotionError::EmptyCandidates));
        assert_eq!(assign_priority_category(&[0, 1]), Err(EmotionError::InvalidCandidate(0)));
        assert_eq!(assign_priority_category(&[7]), Err(EmotionError::InvalidCandidate(7)));
    }

    #[test]
    fn category_serde_checks_range() {
        assert_eq!(serde_json::to_string(&EmotionCategory::new(5).unwrap()).unwrap(), "5");
        assert!(serde_json::from_str::<EmotionCategory>("9").is_err());
        assert_eq!(EmotionCategory::new(6).unwrap().priority_rank(), Some(0));
        assert_eq!(EmotionCategory::EXCLUDED.priority_rank(), None);
    }

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_frame_happy() {
        let m = FrameEmotionMatrix::new(names(&["Happy", "Neutral"]), array![[0.9, 0.1]]).unwrap();
        let s = score_emotion(&m, 1).unwrap();
        assert_eq!((s.class_name.as_str(), s.score), ("Happy", 0.9));
    }

    #[test]
    fn neutral_top_falls_back_to_runner_up() {
        let m = FrameEmotionMatrix::new(names(&["Happy", "Neutral", "Sad"]), array![[0.2, 0.9, 0.6]]).unwrap();
        let s = score_emotion(&m, 10).unwrap();
        assert_eq!((s.class_name.as_str(), s.score), ("Sad", 0.6));
    }

    #[test]
    fn ties_take_lower_index() {
        let m = FrameEmotionMatrix::new(names(&["Neutral", "Angry", "Happy"]), array![[0.9, 0.5, 0.5]]).unwrap();
        assert_eq!(score_emotion(&m, 1).unwrap().class_name, "Angry");
    }

    #[test]
    fn linear_ramp_top_ten() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![0.95 * i as f64 / 19.0, 0.05]).collect();
        let m = FrameEmotionMatrix::from_rows(names(&["Happy", "Neutral"]), &rows).unwrap();
        let mut col: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        col.sort_by(|a, b| b.total_cmp(a));
        let oracle = col[..10].iter().sum::<f64>() / 10.0;
        let s = score_emotion(&m, 10).unwrap();
        assert_eq!(s.class_name, "Happy");
        assert!((s.score - oracle).abs() < 1e-12);
        // n beyond F uses every frame
        let all = score_emotion(&m, 100).unwrap();
        assert!((all.score - col.iter().sum::<f64>() / 20.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_validation() {
        assert_eq!(
            FrameEmotionMatrix::new(names(&["Happy"]), array![[0.5]]),
            Err(EmotionError::MatrixShape { frames: 1, classes: 1 })
        );
        assert_eq!(
            FrameEmotionMatrix::new(names(&["Happy", "Sad"]), array![[0.5, 0.5]]),
            Err(EmotionError::MissingNeutral)
        );
        assert_eq!(
            FrameEmotionMatrix::new(names(&["Happy", "Neutral"]), array![[0.5, 1.5]]),
            Err(EmotionError::ConfidenceRange { frame: 0, class: 1 })
        );
        let m = FrameEmotionMatrix::new(names(&["Happy", "Neutral"]), array![[0.5, 0.5]]).unwrap();
        assert_eq!(score_emotion(&m, 0), Err(EmotionError::ZeroTopN));
    }

    #[test]
    fn threshold_examples() {
        let c = |v| EmotionCategory::new(v).unwrap();
        let v = threshold_verdict(c(5), "Sad", 0.65, 0.7);
        assert!(!v.retained && v.reclassified_nonemotional);
        let v = threshold_verdict(c(1), "Happy", 0.9, 0.7);
        assert!(v.retained && v.priority && !v.reclassified_nonemotional);
        assert!(threshold_verdict(c(1), "Happy", 0.2, 0.7).priority);
        assert!(!threshold_verdict(c(2), "Happy", 0.7, 0.7).retained);
        assert!(threshold_verdict(c(2), "Happy", 0.700001, 0.7).retained);
        assert!(!threshold_verdict(c(2), "Happy", 0.5, 0.7).reclassified_nonemotional);
        assert!(!threshold_verdict(EmotionCategory::EXCLUDED, "Happy", 0.99, 0.7).retained);
    }

    #[test]
    fn evaluate_excluded_video() {
        let m = FrameEmotionMatrix::new(names(&["Happy", "Neutral"]), array![[0.95, 0.1]]).unwrap();
        let v = evaluate_video(&ExclusionFlags { subject_count: 4, ..flags() }, &[1], &m, &EmotionConfig::default()).unwrap();
        assert_eq!(v.category, EmotionCategory::EXCLUDED);
        assert!(!v.retained);
        let v = evaluate_video(&flags(), &[1, 6], &m, &EmotionConfig::default()).unwrap();
        assert_eq!(v.category.value(), 6);
        assert!(v.retained);
    }

    fn full_context() -> SceneContext {
        SceneContext {
            environment: Some("a dim kitchen at night".into()),
            relationships: Some("two siblings arguing".into()),
            plot: Some("the older one has just learned a secret".into()),
        }
    }

    fn full_motion() -> MotionTimeline {
        MotionTimeline {
            facial: vec!["eyebrows lower".into(), "gaze drops".into()],
            head: vec!["tilts left".into()],
            body: vec!["leans forward".into(), "shrugs".into()],
        }
    }

    #[test]
    fn caption_sections_in_fixed_order() {
        let s = compose_emotion_caption(&full_context(), &full_motion()).unwrap();
        let labels = ["Context:", "Environment:", "Relationships:", "Plot:", "Motion:", "Facial:", "Head:", "Body:"];
        let mut last = 0;
        for l in labels {
            let pos = s.find(l).unwrap_or_else(|| panic!("{l} missing in {s}"));
            assert!(pos >= last);
            last = pos;
        }
        assert!(s.contains("Facial: eyebrows lower; then gaze drops"));
        assert_eq!(s, compose_emotion_caption(&full_context(), &full_motion()).unwrap());
    }

    #[test]
    fn caption_omits_empty_fields() {
        let ctx = SceneContext { relationships: None, ..full_context() };
        let s = compose_emotion_caption(&ctx, &full_motion()).unwrap();
        assert!(!s.contains("Relationships"));
        assert!(s.contains("Environment") && s.contains("Plot"));
        let s = compose_emotion_caption(&SceneContext::default(), &MotionTimeline { head: vec!["nods".into()], ..Default::default() }).unwrap();
        assert_eq!(s, "Motion:\n  Head: nods");
        assert_eq!(
            compose_emotion_caption(&full_context(), &MotionTimeline::default()),
            Err(EmotionError::AllMotionEmpty)
        );
    }
}
