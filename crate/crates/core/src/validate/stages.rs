//! One pure predicate per stage. A failing predicate yields its drop reason.

use super::chain::Candidate;
use super::config::{FilterConfig, MaskSource};
use super::pixels::detect_frame_jump;
use super::StageName;
use crate::model::{ClipWindow, FaceAnnotation, SyncAnnotation, VideoRecord};

pub type Check = Result<(), String>;

/// Drop reason for a stage that needs an annotation the record lacks.
pub fn missing(field: &str) -> String {
    format!("missing_annotation:{field}")
}

fn fail(reason: &str) -> Check {
    Err(reason.to_string())
}

/// Passes iff `|av_offset_ms| <= max_offset_ms` and `sync_confidence >= min_confidence`.
pub fn check_sync(sync: &SyncAnnotation, max_offset_ms: f64, min_confidence: f64) -> Check {
    if sync.av_offset_ms.abs() > max_offset_ms {
        return fail("offset");
    }
    if sync.sync_confidence < min_confidence {
        return fail("sync_confidence_below_min");
    }
    Ok(())
}

pub fn check_mask_area(mask_fraction: f64, min_fraction: f64) -> bool {
    mask_fraction >= min_fraction
}

/// Mean face-box area over the frame, averaged over annotated frames inside
/// the clip; 0 when no box falls inside it.
pub fn face_mask_fraction(face: &FaceAnnotation, clip: &ClipWindow, width: u32, height: u32) -> f64 {
    let frame_area = f64::from(width) * f64::from(height);
    let mut per_frame: std::collections::BTreeMap<u64, f64> = std::collections::BTreeMap::new();
    for b in face.boxes.iter().filter(|b| b.frame >= clip.start_frame && b.frame < clip.end_frame) {
        *per_frame.entry(b.frame).or_default() += b.w * b.h;
    }
    if per_frame.is_empty() || frame_area <= 0.0 {
        return 0.0;
    }
    let total: f64 = per_frame.values().map(|a| (a / frame_area).min(1.0)).sum();
    total / per_frame.len() as f64
}

fn audio_sync(c: &Candidate, cfg: &FilterConfig) -> Check {
    let sync = c.record.annotations.sync.as_ref().ok_or_else(|| missing("sync"))?;
    check_sync(sync, cfg.audio_sync.max_abs_offset_ms, cfg.audio_sync.min_confidence)
}

fn camera(c: &Candidate, cfg: &FilterConfig) -> Check {
    let cam = c.record.annotations.camera.as_ref().ok_or_else(|| missing("camera"))?;
    if !cfg.camera.allowed_types.contains(&cam.camera_type) {
        return fail("camera_type_not_allowed");
    }
    if cam.camera_motion.is_some_and(|m| cfg.camera.rejected_motions.contains(&m)) {
        return fail("camera_motion_rejected");
    }
    Ok(())
}

fn text_visual_quality(c: &Candidate, cfg: &FilterConfig) -> Check {
    let q = c.record.annotations.quality.as_ref().ok_or_else(|| missing("quality"))?;
    let p = &cfg.text_visual_quality;
    if q.perceptual_score < p.min_perceptual_score {
        return fail("perceptual_score_below_min");
    }
    let mut flagged: Vec<_> = q.artifact_flags.iter().filter(|f| p.rejected_flags.contains(f)).collect();
    flagged.sort();
    match flagged.first() {
        Some(flag) => Err(format!("artifact_flag:{flag:?}")),
        None => Ok(()),
    }
}

fn duration(c: &Candidate, cfg: &FilterConfig) -> Check {
    let clip = &c.clip;
    if clip.is_empty() {
        return fail("clip_empty");
    }
    if (clip.fps - c.record.fps).abs() > 1e-9 {
        return fail("fps_mismatch");
    }
    if clip.end_frame > c.record.frame_count() {
        return fail("clip_out_of_bounds");
    }
    let d = clip.duration_s();
    if d < cfg.duration.min_s {
        return fail("duration_below_min");
    }
    if d > cfg.duration.max_s {
        return fail("duration_above_max");
    }
    Ok(())
}

fn visual_defects(c: &Candidate, cfg: &FilterConfig) -> Check {
    let st = c.frame_stats.as_ref().ok_or_else(|| missing("frame_stats"))?;
    if st.check().is_err() {
        return fail("invalid_frame_stats");
    }
    let p = &cfg.visual_defects;
    if st.black_ratio.iter().any(|r| *r > p.max_black_ratio) {
        return fail("black_ratio_above_max");
    }
    if st.white_ratio.iter().any(|r| *r > p.max_white_ratio) {
        return fail("white_ratio_above_max");
    }
    let b = st.border;
    let rows = f64::from(b.top.max(b.bottom)) / f64::from(st.height.max(1));
    let cols = f64::from(b.left.max(b.right)) / f64::from(st.width.max(1));
    if rows > p.max_border_frac || cols > p.max_border_frac {
        return fail("border_above_max");
    }
    if !detect_frame_jump(&st.interframe_diff, p.jump_k).is_empty() {
        return fail("frame_jump");
    }
    Ok(())
}

fn motion(c: &Candidate, cfg: &FilterConfig) -> Check {
    let m = c.record.annotations.motion.as_ref().ok_or_else(|| missing("motion"))?;
    let p = &cfg.motion;
    if m.motion_speed == crate::model::MotionSpeed::Abnormal {
        return fail("motion_speed_abnormal");
    }
    if !p.allowed_speeds.contains(&m.motion_speed) {
        return fail("motion_speed_not_allowed");
    }
    if m.motion_intensity < p.min_intensity || m.motion_intensity > p.max_intensity {
        return fail("motion_intensity_out_of_range");
    }
    Ok(())
}

fn mask_fraction_of(c: &Candidate, source: MaskSource) -> Result<f64, String> {
    let from_faces = |record: &VideoRecord| {
        let face = record.annotations.face.as_ref().ok_or_else(|| missing("face"))?;
        Ok(face_mask_fraction(face, &c.clip, record.width, record.height))
    };
    match source {
        MaskSource::Candidate => c.mask_fraction.ok_or_else(|| missing("mask_fraction")),
        MaskSource::FaceBox => from_faces(&c.record),
        MaskSource::Auto => match c.mask_fraction {
            Some(f) => Ok(f),
            None => from_faces(&c.record),
        },
    }
}

fn mask_area(c: &Candidate, cfg: &FilterConfig) -> Check {
    let fraction = mask_fraction_of(c, cfg.mask_area.source)?;
    if check_mask_area(fraction, cfg.mask_area.min_fraction) {
        Ok(())
    } else {
        fail("mask_fraction_below_min")
    }
}

/// Evaluates one stage in isolation.
pub fn evaluate_stage(stage: StageName, c: &Candidate, cfg: &FilterConfig) -> Check {
    match stage {
        StageName::AudioSync => audio_sync(c, cfg),
        StageName::CameraSuitability => camera(c, cfg),
        StageName::TextVisualQuality => text_visual_quality(c, cfg),
        StageName::Duration => duration(c, cfg),
        StageName::VisualDefects => visual_defects(c, cfg),
        StageName::MotionConsistency => motion(c, cfg),
        StageName::MaskArea => mask_area(c, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FaceBox, SourceCategory};

    fn sync(off: f64, conf: f64) -> SyncAnnotation {
        SyncAnnotation { av_offset_ms: off, sync_confidence: conf }
    }

    #[test]
    fn sync_examples() {
        assert!(check_sync(&sync(0.0, 1.0), 120.0, 0.5).is_ok());
        assert!(check_sync(&sync(120.0, 0.5), 120.0, 0.5).is_ok());
        assert!(check_sync(&sync(-120.0, 0.9), 120.0, 0.5).is_ok());
        assert_eq!(check_sync(&sync(-121.0, 0.9), 120.0, 0.5), Err("offset".into()));
        assert_eq!(check_sync(&sync(10.0, 0.49), 120.0, 0.5), Err("sync_confidence_below_min".into()));
    }

    #[test]
    fn mask_examples() {
        assert!(check_mask_area(0.5, 0.2));
        assert!(check_mask_area(0.0, 0.0));
        assert!(!check_mask_area(0.1, 0.2));
    }

    #[test]
    fn face_fraction_uses_window_frames() {
        let mk = |frame, w| FaceBox { frame, x: 0.0, y: 0.0, w, h: 10.0, confidence: 0.9 };
        let face = FaceAnnotation {
            boxes: vec![mk(0, 10.0), mk(5, 20.0), mk(5, 20.0), mk(50, 100.0)],
            landmarks: None,
            person_count: 2,
            head_pose: vec![],
        };
        let clip = ClipWindow { video_id: "v".into(), start_frame: 0, end_frame: 10, fps: 25.0 };
        // frame 0: 100/1000, frame 5: 400/1000
        assert!((face_mask_fraction(&face, &clip, 100, 10) - 0.25).abs() < 1e-12);
        let late = ClipWindow { start_frame: 20, end_frame: 40, ..clip };
        assert_eq!(face_mask_fraction(&face, &late, 100, 10), 0.0);
    }

    #[test]
    fn missing_annotation_reason() {
        let record = VideoRecord::new("v", SourceCategory::Interview, 10.0, 25.0, 64, 64);
        let c = Candidate {
            clip: ClipWindow { video_id: "v".into(), start_frame: 0, end_frame: 93, fps: 25.0 },
            record,
            frame_stats: None,
            mask_fraction: None,
        };
        let cfg = FilterConfig::default();
        assert_eq!(evaluate_stage(StageName::AudioSync, &c, &cfg), Err("missing_annotation:sync".into()));
        assert_eq!(evaluate_stage(StageName::VisualDefects, &c, &cfg), Err("missing_annotation:frame_stats".into()));
        assert_eq!(evaluate_stage(StageName::MaskArea, &c, &cfg), Err("missing_annotation:face".into()));
        assert!(evaluate_stage(StageName::Duration, &c, &cfg).is_ok());
    }
}
