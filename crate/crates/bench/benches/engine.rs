use avatar_forge::audio_align::{align_audio, StubEncoder, WINDOW_FRAMES};
use avatar_forge::config::PipelineConfig;
use avatar_forge::fixture::{corpus, random_candidates};
use avatar_forge::grpo::{per_frame_advantage, RewardTensor, SigmaMode};
use avatar_forge::multiperson::{derive_single_speaker_segments, Interval, PersonTrack};
use avatar_forge::pipeline::run_pipeline;
use avatar_forge::validate::{run_filter_chain, FilterConfig};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn audio(c: &mut Criterion) {
    let enc = StubEncoder::new(1);
    c.bench_function("align_audio 3.72s", |b| b.iter(|| align_audio(black_box(3.72), &enc, WINDOW_FRAMES).unwrap()));
}

fn filter_chain(c: &mut Criterion) {
    let cfg = FilterConfig::default();
    let candidates = random_candidates(3, 2000);
    c.bench_function("filter chain 2000", |b| {
        b.iter_batched(|| candidates.clone(), |cs| run_filter_chain(cs, &cfg).unwrap(), BatchSize::LargeInput)
    });
}

fn advantages(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values = Array3::from_shape_simple_fn((16, 3, 93), || rng.random_range(0.0..1.0));
    let rt = RewardTensor::new(values, vec![1.0, 0.5, 0.25]).unwrap();
    c.bench_function("advantage 16x3x93", |b| b.iter(|| per_frame_advantage(&rt, 1e-6, SigmaMode::MaxOverPartitions).unwrap()));
}

fn segments(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tracks: Vec<PersonTrack> = (0..6)
        .map(|i| PersonTrack {
            track_id: format!("t{i}"),
            frames: vec![],
            boxes: vec![],
            speaking_intervals: (0..200)
                .map(|_| {
                    let s = rng.random_range(0.0..600.0);
                    Interval { start_s: s, end_s: s + rng.random_range(0.1..5.0) }
                })
                .collect(),
        })
        .collect();
    c.bench_function("single-speaker segments 6x200", |b| b.iter(|| derive_single_speaker_segments(black_box(&tracks), 1.0)));
}

fn pipeline(c: &mut Criterion) {
    let data = corpus(7);
    let cfg = PipelineConfig::default();
    c.bench_function("pipeline corpus", |b| b.iter(|| run_pipeline(&data.records, data.clips.clone(), &cfg).unwrap()));
}

criterion_group!(benches, audio, filter_chain, advantages, segments, pipeline);
criterion_main!(benches);
