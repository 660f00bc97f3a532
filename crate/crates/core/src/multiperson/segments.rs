use serde::{Deserialize, Serialize};

use super::PersonTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSegment {
    pub track_id: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl SpeakerSegment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Slack on the minimum-length filter so `15.61 - 14.76` still counts as 0.85 s.
const LENGTH_TOLERANCE_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    // Ends sort before starts at the same instant: intervals are half-open.
    End,
    Start,
}

/// Each track's speaking time minus everyone else's, as an event sweep.
///
/// Between consecutive event times exactly one track may be active; those
/// stretches become segments. Abutting stretches of the same track are
/// joined before the `min_segment_s` filter. Output is sorted by start.
pub fn derive_single_speaker_segments(tracks: &[PersonTrack], min_segment_s: f64) -> Vec<SpeakerSegment> {
    let mut events: Vec<(f64, Edge, usize)> = Vec::new();
    for (idx, track) in tracks.iter().enumerate() {
        for iv in &track.speaking_intervals {
            events.push((iv.start_s, Edge::Start, idx));
            events.push((iv.end_s, Edge::End, idx));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // A track's own intervals may overlap, so keep a depth per track.
    let mut depth = vec![0u32; tracks.len()];
    let mut active = 0usize;
    let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut i = 0;
    while i < events.len() {
        let now = events[i].0;
        if active == 1 && now > prev {
            let owner = depth.iter().position(|d| *d > 0).expect("one active track");
            match pieces.last_mut() {
                Some(last) if last.0 == owner && last.2 == prev => last.2 = now,
                _ => pieces.push((owner, prev, now)),
            }
        }
        while i < events.len() && events[i].0 == now {
            let (_, edge, idx) = events[i];
            match edge {
                Edge::Start => {
                    if depth[idx] == 0 {
                        active += 1;
                    }
                    depth[idx] += 1;
                }
                Edge::End => {
                    depth[idx] -= 1;
                    if depth[idx] == 0 {
                        active -= 1;
                    }
                }
            }
            i += 1;
        }
        prev = now;
    }

    pieces
        .into_iter()
        .filter(|(_, a, b)| b - a >= min_segment_s - LENGTH_TOLERANCE_S)
        .map(|(idx, a, b)| SpeakerSegment { track_id: tracks[idx].track_id.clone(), start_s: a, end_s: b })
        .collect()
}
