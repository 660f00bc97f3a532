use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{BBox, MultipersonError, PersonTrack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Track(String),
    Box(BBox),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BindingRole {
    TargetSpeakerA,
    TargetSpeakerB,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AudioStream {
    StreamA,
    StreamB,
    Silent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingEntry {
    pub region: Region,
    pub role: BindingRole,
    pub audio_stream: AudioStream,
    /// Attention-label category, unique within the binding.
    pub label_id: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionBinding {
    pub entries: Vec<BindingEntry>,
}

impl ConditionBinding {
    /// Distinct audio streams referenced, in stream order.
    pub fn streams(&self) -> Vec<AudioStream> {
        self.entries.iter().map(|e| e.audio_stream).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Binds targets to speech streams A/B and every other track to one shared
/// silent stream. Labels run `0..n`: targets in the given order, then
/// background tracks sorted by id.
pub fn build_condition_binding(tracks: &[PersonTrack], target_ids: &[&str]) -> Result<ConditionBinding, MultipersonError> {
    match target_ids.len() {
        0 => return Err(MultipersonError::NoTargets),
        1 | 2 => {}
        n => return Err(MultipersonError::TooManyTargets(n)),
    }
    if target_ids.len() == 2 && target_ids[0] == target_ids[1] {
        return Err(MultipersonError::DuplicateTarget(target_ids[0].to_string()));
    }
    for id in target_ids {
        if !tracks.iter().any(|t| t.track_id == *id) {
            return Err(MultipersonError::UnknownTrack(id.to_string()));
        }
    }

    let mut entries = Vec::new();
    let target_slots = [(BindingRole::TargetSpeakerA, AudioStream::StreamA), (BindingRole::TargetSpeakerB, AudioStream::StreamB)];
    for (id, (role, stream)) in target_ids.iter().zip(target_slots) {
        entries.push(BindingEntry { region: Region::Track(id.to_string()), role, audio_stream: stream, label_id: 0 });
    }
    let background: BTreeSet<&str> = tracks
        .iter()
        .map(|t| t.track_id.as_str())
        .filter(|id| !target_ids.contains(id))
        .collect();
    for id in background {
        entries.push(BindingEntry {
            region: Region::Track(id.to_string()),
            role: BindingRole::Background,
            audio_stream: AudioStream::Silent,
            label_id: 0,
        });
    }
    for (label, e) in entries.iter_mut().enumerate() {
        e.label_id = label as u32;
    }
    Ok(ConditionBinding { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tracks(ids: &[&str]) -> Vec<PersonTrack> {
        ids.iter()
            .map(|id| PersonTrack { track_id: id.to_string(), frames: vec![], boxes: vec![], speaking_intervals: vec![] })
            .collect()
    }

    fn summary(b: &ConditionBinding) -> Vec<(String, AudioStream, u32)> {
        b.entries
            .iter()
            .map(|e| match &e.region {
                Region::Track(id) => (id.clone(), e.audio_stream, e.label_id),
                Region::Box(_) => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn two_targets_two_background() {
        let b = build_condition_binding(&tracks(&["t3", "t1", "t0", "t2"]), &["t0", "t1"]).unwrap();
        assert_eq!(
            summary(&b),
            vec![
                ("t0".into(), AudioStream::StreamA, 0),
                ("t1".into(), AudioStream::StreamB, 1),
                ("t2".into(), AudioStream::Silent, 2),
                ("t3".into(), AudioStream::Silent, 3),
            ]
        );
        assert_eq!(b.streams(), vec![AudioStream::StreamA, AudioStream::StreamB, AudioStream::Silent]);
        assert!(b.entries[2..].iter().all(|e| e.role == BindingRole::Background));
    }

    #[test]
    fn target_order_decides_streams() {
        let b = build_condition_binding(&tracks(&["t0", "t1"]), &["t1", "t0"]).unwrap();
        assert_eq!(summary(&b)[0], ("t1".into(), AudioStream::StreamA, 0));
    }

    #[test]
    fn single_target_no_silent() {
        let b = build_condition_binding(&tracks(&["t0"]), &["t0"]).unwrap();
        assert_eq!(summary(&b), vec![("t0".into(), AudioStream::StreamA, 0)]);
        assert_eq!(b.streams(), vec![AudioStream::StreamA]);
    }

    #[test]
    fn errors() {
        let t = tracks(&["t0", "t1", "t2"]);
        assert_eq!(build_condition_binding(&t, &["t9"]), Err(MultipersonError::UnknownTrack("t9".into())));
        assert_eq!(build_condition_binding(&t, &["t0", "t1", "t2"]), Err(MultipersonError::TooManyTargets(3)));
        assert_eq!(build_condition_binding(&t, &[]), Err(MultipersonError::NoTargets));
        assert_eq!(build_condition_binding(&t, &["t0", "t0"]), Err(MultipersonError::DuplicateTarget("t0".into())));
    }

    #[test]
    fn many_background_share_one_silent_stream() {
        let ids: Vec<String> = (0..9).map(|i| format!("p{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let b = build_condition_binding(&tracks(&refs), &["p4", "p7"]).unwrap();
        assert_eq!(b.streams().iter().filter(|s| **s == AudioStream::Silent).count(), 1);
        let labels: BTreeSet<u32> = b.entries.iter().map(|e| e.label_id).collect();
        assert_eq!(labels.len(), 9);
        assert_eq!(b, build_condition_binding(&tracks(&refs), &["p4", "p7"]).unwrap());
    }
}
