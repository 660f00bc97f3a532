//! Silent-data curation: clip decomposition, two-model agreement and strict
//! video-level aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ClipWindow;

pub const DEFAULT_CLIP_LEN_S: f64 = 4.0;
pub const DEFAULT_STRIDE_S: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpeakingVerdict {
    Speaking,
    NotSpeaking,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipVerdict {
    pub clip: ClipWindow,
    pub model_a: SpeakingVerdict,
    pub model_b: SpeakingVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SilenceLabel {
    Silent,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoSilenceLabel {
    pub video_id: String,
    pub label: SilenceLabel,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SilentError {
    #[error("video {0} has no clip verdicts")]
    EmptyVerdicts(String),
    #[error("verdict list mixes videos {0} and {1}")]
    MixedVideos(String, String),
}

/// A clip span in seconds, `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpan {
    pub start_s: f64,
    pub end_s: f64,
}

/// Windows at `0, stride, 2*stride, ...` that fit entirely in the video; a
/// video shorter than one clip yields a single window over the whole video.
pub fn decompose_clips(duration_s: f64, clip_len_s: f64, stride_s: f64) -> Vec<ClipSpan> {
    assert!(clip_len_s > 0.0, "clip_len_s must be positive");
    assert!(stride_s > 0.0 && stride_s <= clip_len_s, "stride must lie in (0, clip_len]");
    if duration_s < clip_len_s {
        return vec![ClipSpan { start_s: 0.0, end_s: duration_s }];
    }
    // Integer step count keeps starts free of accumulated rounding.
    let tol = 1e-9 * duration_s.max(1.0);
    let mut out = Vec::new();
    let mut n = 0u64;
    loop {
        let start = n as f64 * stride_s;
        if start + clip_len_s > duration_s + tol {
            break;
        }
        out.push(ClipSpan { start_s: start, end_s: start + clip_len_s });
        n += 1;
    }
    out
}

/// Frame-indexed version of [`decompose_clips`].
pub fn decompose_clip_windows(
    video_id: &str,
    duration_s: f64,
    fps: f64,
    clip_len_s: f64,
    stride_s: f64,
) -> Vec<ClipWindow> {
    decompose_clips(duration_s, clip_len_s, stride_s)
        .into_iter()
        .map(|s| ClipWindow {
            video_id: video_id.to_string(),
            start_frame: (s.start_s * fps).round() as u64,
            end_frame: (s.end_s * fps).round() as u64,
            fps,
        })
        .collect()
}

/// A clip is silent only when both models say `NotSpeaking`.
pub fn agree_silent(verdict: &ClipVerdict) -> bool {
    verdict.model_a == SpeakingVerdict::NotSpeaking && verdict.model_b == SpeakingVerdict::NotSpeaking
}

/// `Silent` iff every clip is agreed silent; anything else excludes the video.
pub fn aggregate_video(verdicts: &[ClipVerdict]) -> Result<VideoSilenceLabel, SilentError> {
    let first = verdicts.first().ok_or_else(|| SilentError::EmptyVerdicts(String::new()))?;
    let video_id = &first.clip.video_id;
    if let Some(other) = verdicts.iter().find(|v| &v.clip.video_id != video_id) {
        return Err(SilentError::MixedVideos(video_id.clone(), other.clip.video_id.clone()));
    }
    let label = if verdicts.iter().all(agree_silent) { SilenceLabel::Silent } else { SilenceLabel::Excluded };
    Ok(VideoSilenceLabel { video_id: video_id.clone(), label })
}

/// Groups a flat verdict list by video (first-appearance order) and labels each video.
pub fn label_videos(verdicts: &[ClipVerdict]) -> Vec<VideoSilenceLabel> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: std::collections::HashMap<&str, Vec<ClipVerdict>> = Default::default();
    for v in verdicts {
        let id = v.clip.video_id.as_str();
        groups
            .entry(id)
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(v.clone());
    }
    order
        .into_iter()
        .map(|id| aggregate_video(&groups[id]).expect("non-empty single-video group"))
        .collect()
}
