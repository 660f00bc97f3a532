//! Synthetic data: seeded annotation generators (also backing the mock
//! annotators), random filter-chain candidates, and the bundled corpus.

use ndarray::{s, Array3};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::model::{
    ArtifactFlag, AudioAnnotation, BodyAnnotation, CameraAnnotation, CameraMotion, CameraType, CaptionSet, ClipWindow,
    Composition, FaceAnnotation, FaceBox, HeadPose, MotionAnnotation, MotionSpeed, QualityAnnotation, ShotSize,
    SourceCategory, SyncAnnotation, TemporalSpan, VideoRecord,
};
use crate::seed::rng_for;
use crate::validate::{compute_frame_stats, Border, Candidate, ClipEntry, FrameStats, StatsParams, VisualDefectParams};

pub const CORPUS_SIZE: usize = 20;
pub const CLIP_FRAMES: u64 = 93;
const LUMA_H: usize = 18;
const LUMA_W: usize = 32;

pub fn gen_face<R: Rng>(rng: &mut R, rec: &VideoRecord) -> FaceAnnotation {
    let people: u32 = if rng.random_bool(0.8) { 1 } else { 2 };
    let (w, h) = (f64::from(rec.width), f64::from(rec.height));
    let frames = rec.frame_count();
    let mut boxes = Vec::new();
    for p in 0..people {
        let area = rng.random_range(0.02..0.30) / f64::from(people);
        let side = (area * w * h).sqrt().min(w.min(h) * 0.95);
        let x = rng.random_range(0.0..=(w - side)) * 0.5 + f64::from(p) * (w - side) * 0.5;
        let y = rng.random_range(0.0..=(h - side));
        for frame in (0..frames).step_by(10) {
            boxes.push(FaceBox { frame, x, y, w: side, h: side, confidence: rng.random_range(0.5..1.0) });
        }
    }
    boxes.sort_by_key(|b| b.frame);
    let yaw_span = if rng.random_bool(0.8) { 25.0 } else { 60.0 };
    let head_pose = (0..frames)
        .step_by(25)
        .map(|frame| HeadPose {
            frame,
            yaw: rng.random_range(-yaw_span..yaw_span),
            pitch: rng.random_range(-15.0..15.0),
            roll: rng.random_range(-10.0..10.0),
        })
        .collect();
    FaceAnnotation { boxes, landmarks: None, person_count: people, head_pose }
}

pub fn gen_body<R: Rng>(rng: &mut R, rec: &VideoRecord) -> BodyAnnotation {
    let composition = *[Composition::Head, Composition::HalfBody, Composition::FullBody].choose(rng).expect("non-empty");
    let hand_visibility: f64 = rng.random_range(0.0..=1.0);
    let hand_visible = (0..rec.frame_count()).step_by(25).map(|_| rng.random_bool(hand_visibility)).collect();
    BodyAnnotation { composition, hand_visible, hand_visibility }
}

/// Audio facts known before vocal separation runs.
pub fn gen_audio<R: Rng>(rng: &mut R) -> AudioAnnotation {
    let has_speech = rng.random_bool(0.9);
    let language = has_speech.then(|| ["en", "zh"].choose(rng).expect("non-empty").to_string());
    AudioAnnotation { has_speech, vocal_track_available: false, language }
}

pub fn gen_vocal_track<R: Rng>(rng: &mut R, audio: &AudioAnnotation) -> bool {
    audio.has_speech && rng.random_bool(0.95)
}

pub fn gen_sync<R: Rng>(rng: &mut R) -> SyncAnnotation {
    let av_offset_ms = if rng.random_bool(0.9) { rng.random_range(-60.0..60.0) } else { rng.random_range(-300.0..300.0) };
    SyncAnnotation { av_offset_ms, sync_confidence: rng.random_range(0.42..1.0) }
}

pub fn gen_quality<R: Rng>(rng: &mut R) -> QualityAnnotation {
    const FLAGS: [ArtifactFlag; 8] = [
        ArtifactFlag::TextCoverage,
        ArtifactFlag::Border,
        ArtifactFlag::BlackBorder,
        ArtifactFlag::AbnormalBrightness,
        ArtifactFlag::PixelDegradation,
        ArtifactFlag::Subtitle,
        ArtifactFlag::WhiteFlash,
        ArtifactFlag::Transition,
    ];
    let artifact_flags = if rng.random_bool(0.08) { vec![*FLAGS.choose(rng).expect("non-empty")] } else { vec![] };
    QualityAnnotation { perceptual_score: rng.random_range(0.35..1.0), artifact_flags }
}

pub fn gen_camera<R: Rng>(rng: &mut R) -> CameraAnnotation {
    let roll: f64 = rng.random();
    let camera_type = match roll {
        r if r < 0.5 => CameraType::Static,
        r if r < 0.75 => CameraType::Handheld,
        r if r < 0.92 => CameraType::Tracking,
        _ => CameraType::Other,
    };
    let camera_motion = match camera_type {
        CameraType::Static => rng.random_bool(0.5).then_some(CameraMotion::None),
        _ => Some(
            *[CameraMotion::Pan, CameraMotion::Zoom, CameraMotion::Track, CameraMotion::Pan, CameraMotion::Shake]
                .choose(rng)
                .expect("non-empty"),
        ),
    };
    let shot_size = rng
        .random_bool(0.8)
        .then(|| *[ShotSize::CloseUp, ShotSize::Medium, ShotSize::Full, ShotSize::Wide].choose(rng).expect("non-empty"));
    let lens_type = rng.random_bool(0.7).then(|| ["35mm", "50mm", "85mm"].choose(rng).expect("non-empty").to_string());
    let visual_style =
        rng.random_bool(0.5).then(|| ["cinematic", "documentary", "anime"].choose(rng).expect("non-empty").to_string());
    CameraAnnotation { camera_type, camera_motion, shot_size, lens_type, visual_style }
}

pub fn gen_motion<R: Rng>(rng: &mut R) -> MotionAnnotation {
    let roll: f64 = rng.random();
    let motion_speed = match roll {
        r if r < 0.80 => MotionSpeed::Natural,
        r if r < 0.88 => MotionSpeed::Slow,
        r if r < 0.95 => MotionSpeed::Fast,
        _ => MotionSpeed::Abnormal,
    };
    MotionAnnotation { motion_speed, motion_intensity: rng.random_range(0.0..=1.0) }
}

pub fn gen_captions<R: Rng>(rng: &mut R, rec: &VideoRecord) -> CaptionSet {
    const SUBJECTS: [&str; 4] = ["a woman", "a man", "two people", "a singer"];
    const ACTIONS: [&str; 5] = ["talks to the camera", "sings", "gestures while speaking", "laughs", "listens and nods"];
    let subject = SUBJECTS.choose(rng).expect("non-empty");
    let mut spans = Vec::new();
    let mut t = 0.0;
    while t < rec.duration_s {
        let len: f64 = rng.random_range(2.0..6.0);
        let end = (t + len).min(rec.duration_s);
        if rng.random_bool(0.9) {
            let action = ACTIONS.choose(rng).expect("non-empty");
            spans.push(TemporalSpan { start_s: t, end_s: end, caption: format!("{subject} {action}") });
        }
        t = end;
    }
    CaptionSet {
        detailed: Some(format!("{subject} in a {:?} video, filmed at {}x{}", rec.source_category, rec.width, rec.height)),
        summary: rng.random_bool(0.8).then(|| format!("{subject} on screen")),
        temporal_spans: spans,
    }
}

/// A candidate that passes every stage under the default thresholds.
pub fn passing_candidate(i: usize) -> Candidate {
    let id = format!("pass{i:05}");
    let mut record = VideoRecord::new(&id, SourceCategory::Interview, 8.0, 25.0, 640, 360);
    let a = &mut record.annotations;
    a.audio = Some(AudioAnnotation { has_speech: true, vocal_track_available: true, language: Some("en".into()) });
    a.sync = Some(SyncAnnotation { av_offset_ms: 10.0, sync_confidence: 0.9 });
    a.camera = Some(CameraAnnotation {
        camera_type: CameraType::Static,
        camera_motion: Some(CameraMotion::None),
        shot_size: Some(ShotSize::CloseUp),
        lens_type: None,
        visual_style: None,
    });
    a.quality = Some(QualityAnnotation { perceptual_score: 0.8, artifact_flags: vec![] });
    a.motion = Some(MotionAnnotation { motion_speed: MotionSpeed::Natural, motion_intensity: 0.4 });
    a.face = Some(FaceAnnotation {
        boxes: vec![FaceBox { frame: 0, x: 200.0, y: 80.0, w: 160.0, h: 160.0, confidence: 0.95 }],
        landmarks: None,
        person_count: 1,
        head_pose: vec![],
    });
    let clip = ClipWindow { video_id: id, start_frame: 0, end_frame: CLIP_FRAMES, fps: 25.0 };
    let frame_stats = clean_stats(CLIP_FRAMES as usize, 640, 360, (i as f64 * 0.001) % 0.005);
    Candidate { clip, record, frame_stats: Some(frame_stats), mask_fraction: Some(0.2) }
}

fn clean_stats(frames: usize, width: u32, height: u32, jitter: f64) -> FrameStats {
    FrameStats {
        width,
        height,
        luma_mean: vec![0.5; frames],
        luma_std: vec![0.2; frames],
        black_ratio: vec![0.01; frames],
        white_ratio: vec![0.01; frames],
        border: Border::default(),
        interframe_diff: (0..frames.saturating_sub(1)).map(|k| 0.02 + jitter * ((k % 3) as f64)).collect(),
    }
}

fn random_stats<R: Rng>(rng: &mut R, frames: usize, width: u32, height: u32) -> FrameStats {
    let mut st = clean_stats(frames, width, height, 0.0);
    for v in st.interframe_diff.iter_mut() {
        *v = rng.random_range(0.01..0.03);
    }
    for (b, w) in st.black_ratio.iter_mut().zip(st.white_ratio.iter_mut()) {
        *b = rng.random_range(0.0..0.1);
        *w = rng.random_range(0.0..0.1);
    }
    let k = rng.random_range(0..frames);
    match rng.random_range(0..100) {
        0..4 => st.black_ratio[k] = rng.random_range(0.2..0.9),
        4..7 => st.white_ratio[k] = rng.random_range(0.2..0.9),
        7..11 => st.border.top = rng.random_range(0..height / 4),
        11..15 => st.border.left = rng.random_range(0..width / 4),
        15..19 if !st.interframe_diff.is_empty() => {
            let j = rng.random_range(0..st.interframe_diff.len());
            st.interframe_diff[j] = rng.random_range(0.05..0.5);
        }
        19 => {
            st.interframe_diff.pop();
        }
        _ => {}
    }
    st
}

fn maybe<T, R: Rng>(rng: &mut R, value: T) -> Option<T> {
    rng.random_bool(0.93).then_some(value)
}

/// `n` candidates drawn to hit every stage's pass and fail branches,
/// including missing annotations and exact threshold values.
pub fn random_candidates(seed: u64, n: usize) -> Vec<Candidate> {
    let mut rng = rng_for(seed, &["fixture", "candidates"]);
    (0..n)
        .map(|i| {
            let id = format!("rand{i:05}");
            let category = *SourceCategory::ALL.choose(&mut rng).expect("non-empty");
            let (width, height) = *[(640, 360), (512, 512), (1280, 720)].choose(&mut rng).expect("non-empty");
            let duration = rng.random_range(4.0..30.0);
            let mut record = VideoRecord::new(&id, category, duration, 25.0, width, height);
            let face = gen_face(&mut rng, &record);
            let body = gen_body(&mut rng, &record);
            let mut audio = gen_audio(&mut rng);
            audio.vocal_track_available = gen_vocal_track(&mut rng, &audio);
            let mut sync = gen_sync(&mut rng);
            if rng.random_bool(0.05) {
                sync.sync_confidence = 0.5;
                sync.av_offset_ms = *[-120.0, 120.0].choose(&mut rng).expect("non-empty");
            }
            let captions = gen_captions(&mut rng, &record);
            let (quality, camera, motion) = (gen_quality(&mut rng), gen_camera(&mut rng), gen_motion(&mut rng));
            let a = &mut record.annotations;
            a.face = maybe(&mut rng, face);
            a.body = maybe(&mut rng, body);
            a.audio = Some(audio);
            a.sync = maybe(&mut rng, sync);
            a.quality = maybe(&mut rng, quality);
            a.camera = maybe(&mut rng, camera);
            a.motion = maybe(&mut rng, motion);
            a.captions = captions;

            let total = record.frame_count();
            let len = match rng.random_range(0..100) {
                0..5 => rng.random_range(10..75),
                5..7 => 3100,
                _ => CLIP_FRAMES,
            };
            let start = if rng.random_bool(0.03) { total } else { rng.random_range(0..=total.saturating_sub(len.min(total))) };
            let fps = if rng.random_bool(0.02) { 30.0 } else { 25.0 };
            let clip = ClipWindow { video_id: id, start_frame: start, end_frame: start + len, fps };
            let frame_stats = rng.random_bool(0.95).then(|| random_stats(&mut rng, len.min(200) as usize, width, height));
            let mask_fraction = rng.random_bool(0.5).then(|| rng.random_range(0.0..0.4));
            Candidate { clip, record, frame_stats, mask_fraction }
        })
        .collect()
}

/// Pixel defect injected into a synthetic clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    None,
    BlackFrames,
    WhiteFlash,
    Letterbox,
    SceneCut,
}

/// Smooth moving texture with mild noise; values stay inside `(0.1, 0.9)`
/// unless a defect overrides them.
pub fn synthetic_luma<R: Rng>(rng: &mut R, frames: usize, defect: Defect) -> Array3<f32> {
    let phase: f32 = rng.random_range(0.0..6.28);
    let mut luma = Array3::from_shape_fn((frames, LUMA_H, LUMA_W), |(t, y, x)| {
        0.5 + 0.3 * (x as f32 * 0.7 + y as f32 * 0.3 + t as f32 * 0.05 + phase).sin()
    });
    luma.mapv_inplace(|v| v + rng.random_range(-0.05f32..0.05));
    let mid = frames / 2;
    match defect {
        Defect::None => {}
        Defect::BlackFrames => luma.slice_mut(s![mid..(mid + 5).min(frames), .., ..]).fill(0.0),
        Defect::WhiteFlash => luma.slice_mut(s![mid..(mid + 2).min(frames), .., ..]).fill(1.0),
        Defect::Letterbox => {
            luma.slice_mut(s![.., 0..4, ..]).fill(0.0);
            luma.slice_mut(s![.., (LUMA_H - 4).., ..]).fill(0.0);
        }
        Defect::SceneCut => luma.slice_mut(s![mid.., .., ..]).mapv_inplace(|v| 1.0 - v),
    }
    luma
}

/// The bundled corpus: unannotated records plus measured clip windows.
pub struct Corpus {
    pub records: Vec<VideoRecord>,
    pub clips: Vec<ClipEntry>,
}

pub fn corpus(seed: u64) -> Corpus {
    let mut rng = rng_for(seed, &["fixture", "corpus"]);
    let params: StatsParams = VisualDefectParams::default().stats_params();
    let mut records = Vec::new();
    let mut clips = Vec::new();
    for i in 0..CORPUS_SIZE {
        let id = format!("fx{i:04}");
        let category = SourceCategory::ALL[i % SourceCategory::ALL.len()];
        let (width, height) = [(640, 360), (512, 512), (1280, 720)][i % 3];
        let duration = rng.random_range(6.0..40.0_f64);
        let record = VideoRecord::new(&id, category, (duration * 25.0).round() / 25.0, 25.0, width, height);
        let total = record.frame_count();
        for c in 0..2 {
            let len = if i % 10 == 9 && c == 1 { 60 } else { CLIP_FRAMES };
            let start = rng.random_range(0..=total - len);
            let defect = match (i % 10, c) {
                (3, 0) => Defect::BlackFrames,
                (5, _) => Defect::Letterbox,
                (7, 1) => Defect::SceneCut,
                (8, 0) => Defect::WhiteFlash,
                _ => Defect::None,
            };
            let luma = synthetic_luma(&mut rng, len as usize, defect);
            let stats = compute_frame_stats(&luma, &params).expect("synthetic luma is non-empty");
            let mask_fraction = (c == 0).then(|| (rng.random_range(0.0..0.4) * 1000.0_f64).round() / 1000.0);
            clips.push(ClipEntry {
                clip: ClipWindow { video_id: id.clone(), start_frame: start, end_frame: start + len, fps: 25.0 },
                frame_stats: Some(stats),
                mask_fraction,
            });
        }
        records.push(record);
    }
    Corpus { records, clips }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_record;
    use crate::validate::{run_filter_chain, FilterConfig};

    #[test]
    fn generated_records_are_schema_valid() {
        for c in random_candidates(3, 300) {
            assert_eq!(validate_record(&c.record), vec![], "{}", c.record.video_id);
        }
        assert!(validate_record(&passing_candidate(1).record).is_empty());
    }

    #[test]
    fn random_candidates_hit_every_stage() {
        let (_, report, _) = run_filter_chain(random_candidates(11, 2000), &FilterConfig::default()).unwrap();
        for s in &report.stages {
            assert!(s.dropped > 0, "{} never drops", s.stage);
        }
        assert!(report.accepted > 0);
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        let a = corpus(7);
        let b = corpus(7);
        assert_eq!(a.records, b.records);
        assert_eq!(a.clips, b.clips);
        assert_eq!(a.records.len(), CORPUS_SIZE);
        for r in &a.records {
            assert!(validate_record(r).is_empty());
        }
        for c in &a.clips {
            assert!(c.frame_stats.as_ref().unwrap().check().is_ok());
        }
    }

    #[test]
    fn defects_are_visible_in_stats() {
        let mut rng = rng_for(0, &["t"]);
        let params = VisualDefectParams::default().stats_params();
        let clean = compute_frame_stats(&synthetic_luma(&mut rng, 40, Defect::None), &params).unwrap();
        assert!(clean.black_ratio.iter().all(|r| *r == 0.0));
        assert_eq!(clean.border, Border::default());
        assert!(crate::validate::detect_frame_jump(&clean.interframe_diff, 6.0).is_empty());
        let boxed = compute_frame_stats(&synthetic_luma(&mut rng, 40, Defect::Letterbox), &params).unwrap();
        assert_eq!((boxed.border.top, boxed.border.bottom), (4, 4));
        let cut = compute_frame_stats(&synthetic_luma(&mut rng, 40, Defect::SceneCut), &params).unwrap();
        assert_eq!(crate::validate::detect_frame_jump(&cut.interframe_diff, 6.0), vec![19]);
    }
}
