//! Multi-person curation and condition binding.
//!
//! Person tracks come from an external tracker plus active-speaker detector.
//! This module separates moving people from static look-alikes (posters,
//! portraits), splits videos into single- and multi-person subsets, derives
//! non-overlapping single-speaker segments, and binds target speakers and
//! background people to audio streams.

mod binding;
mod segments;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binding::{build_condition_binding, AudioStream, BindingEntry, BindingRole, ConditionBinding, Region};
pub use segments::{derive_single_speaker_segments, SpeakerSegment};

pub const DEFAULT_MIN_DISPLACEMENT_FRAC: f64 = 0.03;
pub const DEFAULT_MIN_TRACK_FRAMES: usize = 25;
pub const DEFAULT_MIN_SEGMENT_S: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MultipersonError {
    #[error("unknown track {0}")]
    UnknownTrack(String),
    #[error("at most two target speakers are supported, got {0}")]
    TooManyTargets(usize),
    #[error("at least one target speaker is required")]
    NoTargets,
    #[error("track {0} listed twice as a target")]
    DuplicateTarget(String),
    #[error("track {track_id}: {reason}")]
    InvalidTrack { track_id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }
}

/// Half-open speaking interval `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonTrack {
    pub track_id: String,
    pub frames: Vec<u64>,
    pub boxes: Vec<BBox>,
    #[serde(default)]
    pub speaking_intervals: Vec<Interval>,
}

impl PersonTrack {
    pub fn validate(&self, duration_s: f64) -> Result<(), MultipersonError> {
        let fail = |reason: String| Err(MultipersonError::InvalidTrack { track_id: self.track_id.clone(), reason });
        if self.frames.len() != self.boxes.len() {
            return fail(format!("{} frames but {} boxes", self.frames.len(), self.boxes.len()));
        }
        if self.frames.windows(2).any(|w| w[0] >= w[1]) {
            return fail("frames must be strictly increasing".into());
        }
        for iv in &self.speaking_intervals {
            if !(iv.start_s.is_finite() && iv.end_s.is_finite() && iv.start_s < iv.end_s) {
                return fail(format!("interval [{}, {}) is empty or inverted", iv.start_s, iv.end_s));
            }
            if iv.start_s < 0.0 || iv.end_s > duration_s {
                return fail(format!("interval [{}, {}) exceeds the video", iv.start_s, iv.end_s));
            }
        }
        Ok(())
    }
}

/// All person tracks of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSet {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    pub duration_s: f64,
    pub tracks: Vec<PersonTrack>,
}

impl TrackSet {
    pub fn validate(&self) -> Result<(), MultipersonError> {
        self.tracks.iter().try_for_each(|t| t.validate(self.duration_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackMotion {
    Dynamic,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicTrackConfig {
    pub min_center_displacement_frac: f64,
    pub min_frames: usize,
}

impl Default for DynamicTrackConfig {
    fn default() -> Self {
        Self { min_center_displacement_frac: DEFAULT_MIN_DISPLACEMENT_FRAC, min_frames: DEFAULT_MIN_TRACK_FRAMES }
    }
}

/// Dynamic iff the track is long enough and its box centre moves at least
/// `min_center_displacement_frac` of the frame diagonal away from where it started.
pub fn classify_track_dynamic(track: &PersonTrack, width: u32, height: u32, cfg: &DynamicTrackConfig) -> TrackMotion {
    if track.boxes.len() < cfg.min_frames || track.boxes.is_empty() {
        return TrackMotion::Static;
    }
    let diagonal = (f64::from(width).powi(2) + f64::from(height).powi(2)).sqrt();
    let (x0, y0) = track.boxes[0].center();
    let max_disp = track
        .boxes
        .iter()
        .map(|b| {
            let (x, y) = b.center();
            ((x - x0).powi(2) + (y - y0).powi(2)).sqrt()
        })
        .fold(0.0, f64::max);
    if max_disp >= cfg.min_center_displacement_frac * diagonal {
        TrackMotion::Dynamic
    } else {
        TrackMotion::Static
    }
}

pub fn dynamic_tracks<'a>(set: &'a TrackSet, cfg: &DynamicTrackConfig) -> Vec<&'a PersonTrack> {
    set.tracks
        .iter()
        .filter(|t| classify_track_dynamic(t, set.width, set.height, cfg) == TrackMotion::Dynamic)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonPartition {
    Single,
    Multi,
    Excluded,
}

pub fn person_partition(set: &TrackSet, cfg: &DynamicTrackConfig) -> PersonPartition {
    match dynamic_tracks(set, cfg).len() {
        0 => PersonPartition::Excluded,
        1 => PersonPartition::Single,
        _ => PersonPartition::Multi,
    }
}

/// Videos split by dynamic-person count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionResult {
    pub single: Vec<TrackSet>,
    pub multi: Vec<TrackSet>,
    /// Videos with no dynamic track.
    pub excluded: Vec<String>,
}

pub fn partition_person_count(sets: Vec<TrackSet>, cfg: &DynamicTrackConfig) -> PartitionResult {
    let mut out = PartitionResult::default();
    for set in sets {
        match person_partition(&set, cfg) {
            PersonPartition::Single => out.single.push(set),
            PersonPartition::Multi => out.multi.push(set),
            PersonPartition::Excluded => out.excluded.push(set.video_id),
        }
    }
    out
}
