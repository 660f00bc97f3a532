//! Audio feature alignment: encoder hidden states at 50 Hz are pooled into
//! five channels, resampled to the 25 fps video grid and compressed onto the
//! 4x temporally downsampled latent grid.
//!
//! Shapes along the way, for `d` seconds of audio and hidden size `D`:
//!
//! ```text
//! encoder windows   33 x len_w x D     (len_w <= 1500, concatenated over windows)
//! pooled            F x 5 x D          F = round(50 d)
//! aligned           T x 5 x D          T = round(25 d)
//! latent            (1 + ceil((T-1)/4)) x 5 x D
//! ```
//!
//! The encoder itself is pluggable through [`Encoder`]; [`StubEncoder`] is a
//! seeded stand-in so the tensor math can be exercised without model weights.

use ndarray::{concatenate, s, Array3, ArrayView3, Axis};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::seed::rng_for;

pub const LAYER_COUNT: usize = 33;
pub const LAYERS_PER_GROUP: usize = 8;
pub const POOLED_CHANNELS: usize = 5;
pub const HIDDEN_DIM: usize = 1280;
pub const ENCODER_RATE_HZ: f64 = 50.0;
pub const VIDEO_FPS: f64 = 25.0;
/// 30 s of encoder context at 50 Hz.
pub const WINDOW_FRAMES: usize = 1500;
pub const LATENT_STRIDE: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlignError {
    #[error("expected {LAYER_COUNT} hidden-state layers, found {0}")]
    WrongLayerCount(usize),
    #[error("expected {POOLED_CHANNELS} pooled channels, found {0}")]
    WrongChannelCount(usize),
    #[error("tensor has no frames")]
    Empty,
    #[error("tensor contains non-finite values")]
    NonFinite,
    #[error("window {index} returned {found} frames, expected {expected}")]
    WindowLength { index: usize, expected: usize, found: usize },
}

/// Encoder output: layers x frames x dim at 50 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateStack(Array3<f32>);

impl HiddenStateStack {
    pub fn new(data: Array3<f32>) -> Result<Self, AlignError> {
        if data.shape()[0] != LAYER_COUNT {
            return Err(AlignError::WrongLayerCount(data.shape()[0]));
        }
        if data.shape()[1] == 0 {
            return Err(AlignError::Empty);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::NonFinite);
        }
        Ok(Self(data))
    }

    pub fn view(&self) -> ArrayView3<'_, f32> {
        self.0.view()
    }

    pub fn frames(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.0.shape()[2]
    }
}

macro_rules! frames_x5_tensor {
    ($(#[$m:meta])* $name:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Array3<f32>);

        impl $name {
            pub fn new(data: Array3<f32>) -> Result<Self, AlignError> {
                if data.shape()[1] != POOLED_CHANNELS {
                    return Err(AlignError::WrongChannelCount(data.shape()[1]));
                }
                if data.shape()[0] == 0 {
                    return Err(AlignError::Empty);
                }
                Ok(Self(data))
            }

            pub fn view(&self) -> ArrayView3<'_, f32> {
                self.0.view()
            }

            pub fn into_inner(self) -> Array3<f32> {
                self.0
            }

            pub fn frames(&self) -> usize {
                self.0.shape()[0]
            }

            pub fn shape(&self) -> [usize; 3] {
                let s = self.0.shape();
                [s[0], s[1], s[2]]
            }
        }
    };
}

frames_x5_tensor!(
    /// Five-channel features at the encoder rate (F x 5 x D).
    PooledFeatures
);
frames_x5_tensor!(
    /// Features on the video frame grid (T x 5 x D).
    AlignedEmbedding
);
frames_x5_tensor!(
    /// Features on the latent frame grid.
    LatentAudio
);

/// Contiguous, non-overlapping `(start, length)` windows covering `[0, total)`.
pub fn split_windows(total_frames: usize, window_frames: usize) -> Vec<(usize, usize)> {
    assert!(window_frames >= 1, "window_frames must be positive");
    (0..total_frames)
        .step_by(window_frames)
        .map(|start| (start, window_frames.min(total_frames - start)))
        .collect()
}

/// Channel g < 4 is the mean of layers `[8g, 8g+8)`; channel 4 is the last layer.
pub fn group_pool(stack: &HiddenStateStack) -> PooledFeatures {
    let src = stack.view();
    let (frames, dim) = (stack.frames(), stack.dim());
    let mut out = Array3::<f32>::zeros((frames, POOLED_CHANNELS, dim));
    let mut acc = vec![0f64; dim];
    for f in 0..frames {
        for g in 0..POOLED_CHANNELS - 1 {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for layer in g * LAYERS_PER_GROUP..(g + 1) * LAYERS_PER_GROUP {
                for (a, v) in acc.iter_mut().zip(src.slice(s![layer, f, ..])) {
                    *a += f64::from(*v);
                }
            }
            for (o, a) in out.slice_mut(s![f, g, ..]).iter_mut().zip(&acc) {
                *o = (a / LAYERS_PER_GROUP as f64) as f32;
            }
        }
        out.slice_mut(s![f, POOLED_CHANNELS - 1, ..])
            .assign(&src.slice(s![LAYER_COUNT - 1, f, ..]));
    }
    PooledFeatures(out)
}

/// Source position of output frame `t` on the endpoint-aligned grid.
pub fn source_position(t: usize, source_frames: usize, target_frames: usize) -> f64 {
    if target_frames <= 1 || source_frames <= 1 {
        return 0.0;
    }
    (t * (source_frames - 1)) as f64 / (target_frames - 1) as f64
}

/// Linear interpolation onto `target_frames` frames, endpoints aligned.
pub fn resample_linear(features: &PooledFeatures, target_frames: usize) -> AlignedEmbedding {
    assert!(target_frames >= 1, "target_frames must be positive");
    let src = features.view();
    let (source_frames, dim) = (features.frames(), src.shape()[2]);
    let mut out = Array3::<f32>::zeros((target_frames, POOLED_CHANNELS, dim));
    for t in 0..target_frames {
        let p = source_position(t, source_frames, target_frames);
        let lo = p.floor() as usize;
        let hi = (lo + 1).min(source_frames - 1);
        let w = p - lo as f64;
        let a = src.slice(s![lo, .., ..]);
        let b = src.slice(s![hi, .., ..]);
        ndarray::Zip::from(out.slice_mut(s![t, .., ..]))
            .and(&a)
            .and(&b)
            .for_each(|o, &a, &b| {
                let (a, b) = (f64::from(a), f64::from(b));
                *o = (a + w * (b - a)) as f32;
            });
    }
    AlignedEmbedding(out)
}

/// Number of latent frames for `t` video frames: `1 + ceil((t-1)/4)`.
pub fn latent_len(video_frames: usize) -> usize {
    assert!(video_frames >= 1);
    1 + (video_frames - 1).div_ceil(LATENT_STRIDE)
}

/// Inclusive video-frame range feeding latent frame `j`.
pub fn latent_source_range(j: usize, video_frames: usize) -> (usize, usize) {
    if j == 0 {
        (0, 0)
    } else {
        (LATENT_STRIDE * (j - 1) + 1, (LATENT_STRIDE * j).min(video_frames - 1))
    }
}

/// Frame 0 passes through; each later latent frame averages the next four video frames.
pub fn compress_to_latent(embedding: &AlignedEmbedding) -> LatentAudio {
    let src = embedding.view();
    let (frames, dim) = (embedding.frames(), src.shape()[2]);
    let len = latent_len(frames);
    let mut out = Array3::<f32>::zeros((len, POOLED_CHANNELS, dim));
    for j in 0..len {
        let (lo, hi) = latent_source_range(j, frames);
        let n = (hi - lo + 1) as f64;
        let group = src.slice(s![lo..=hi, .., ..]);
        ndarray::Zip::from(out.slice_mut(s![j, .., ..]))
            .and(group.lanes(Axis(0)))
            .for_each(|o, lane| {
                let sum: f64 = lane.iter().map(|v| f64::from(*v)).sum();
                *o = (sum / n) as f32;
            });
    }
    LatentAudio(out)
}

/// Source of encoder hidden states for one window of 50 Hz frames.
pub trait Encoder: Sync {
    fn encode(&self, window_index: usize, start: usize, length: usize) -> Result<HiddenStateStack, AlignError>;
}

/// Seeded pseudo-random encoder output, uniform in `[-1, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct StubEncoder {
    pub seed: u64,
    pub dim: usize,
}

impl StubEncoder {
    pub fn new(seed: u64) -> Self {
        Self { seed, dim: HIDDEN_DIM }
    }

    pub fn with_dim(seed: u64, dim: usize) -> Self {
        Self { seed, dim }
    }
}

/// Deterministic stand-in for the external audio encoder.
pub fn stub_encode(length: usize, seed: u64, window_index: usize, dim: usize) -> HiddenStateStack {
    assert!(length >= 1 && dim >= 1);
    let mut rng = rng_for(seed, &["stub_encoder", &window_index.to_string()]);
    let data = Array3::from_shape_simple_fn((LAYER_COUNT, length, dim), || {
        rng.random::<f32>() * 2.0 - 1.0
    });
    HiddenStateStack(data)
}

impl Encoder for StubEncoder {
    fn encode(&self, window_index: usize, _start: usize, length: usize) -> Result<HiddenStateStack, AlignError> {
        Ok(stub_encode(length, self.seed, window_index, self.dim))
    }
}

/// Every intermediate of one alignment run.
#[derive(Debug, Clone)]
pub struct AlignmentTrace {
    pub encoder_frames: usize,
    pub video_frames: usize,
    pub windows: Vec<(usize, usize)>,
    pub window_shapes: Vec<[usize; 3]>,
    pub pooled: PooledFeatures,
    pub aligned: AlignedEmbedding,
    pub latent: LatentAudio,
}

pub fn encoder_frames_for(duration_s: f64) -> usize {
    (ENCODER_RATE_HZ * duration_s).round() as usize
}

pub fn video_frames_for(duration_s: f64) -> usize {
    (VIDEO_FPS * duration_s).round() as usize
}

/// Runs the whole chain for `duration_s` seconds of audio.
///
/// Windows are encoded and pooled independently, concatenated at 50 Hz, and
/// resampled once over the full sequence.
pub fn align_audio<E: Encoder>(
    duration_s: f64,
    encoder: &E,
    window_frames: usize,
) -> Result<AlignmentTrace, AlignError> {
    let encoder_frames = encoder_frames_for(duration_s);
    let video_frames = video_frames_for(duration_s);
    if encoder_frames == 0 || video_frames == 0 {
        return Err(AlignError::Empty);
    }
    let windows = split_windows(encoder_frames, window_frames);
    let encoded: Vec<([usize; 3], PooledFeatures)> = windows
        .par_iter()
        .enumerate()
        .map(|(index, &(start, length))| {
            let stack = encoder.encode(index, start, length)?;
            if stack.frames() != length {
                return Err(AlignError::WindowLength { index, expected: length, found: stack.frames() });
            }
            let shape = [LAYER_COUNT, stack.frames(), stack.dim()];
            Ok((shape, group_pool(&stack)))
        })
        .collect::<Result<_, _>>()?;
    let window_shapes = encoded.iter().map(|(s, _)| *s).collect();
    let views: Vec<_> = encoded.iter().map(|(_, p)| p.view()).collect();
    let pooled = PooledFeatures(concatenate(Axis(0), &views).expect("windows share channel and dim"));
    let aligned = resample_linear(&pooled, video_frames);
    let latent = compress_to_latent(&aligned);
    Ok(AlignmentTrace { encoder_frames, video_frames, windows, window_shapes, pooled, aligned, latent })
}
