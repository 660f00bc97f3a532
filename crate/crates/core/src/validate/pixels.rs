//! Pixel statistics over decoded luma frames (`F x H x W`, values in `[0,1]`).

use ndarray::{s, Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PixelError {
    #[error("luma input has no frames or no pixels")]
    EmptyInput,
    #[error("thresholds must satisfy 0 <= black_thr < white_thr <= 1")]
    InvalidThresholds,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Border {
    pub top: u32,
    pub bottom: u32,
    pub left: u32,
    pub right: u32,
}

/// Per-frame luma summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumaStats {
    pub luma_mean: Vec<f64>,
    pub luma_std: Vec<f64>,
    pub black_ratio: Vec<f64>,
    pub white_ratio: Vec<f64>,
}

/// Everything the visual-defect stage needs about a sampled clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub width: u32,
    pub height: u32,
    pub luma_mean: Vec<f64>,
    pub luma_std: Vec<f64>,
    pub black_ratio: Vec<f64>,
    pub white_ratio: Vec<f64>,
    pub border: Border,
    /// Mean absolute luma change between consecutive frames (`frames - 1` entries).
    pub interframe_diff: Vec<f64>,
}

impl FrameStats {
    pub fn frames(&self) -> usize {
        self.luma_mean.len()
    }

    /// Structural invariants; returns a description of the first problem found.
    pub fn check(&self) -> Result<(), String> {
        let n = self.frames();
        if n == 0 {
            return Err("frame stats cover no frames".into());
        }
        if [self.luma_std.len(), self.black_ratio.len(), self.white_ratio.len()].iter().any(|l| *l != n) {
            return Err("per-frame vectors differ in length".into());
        }
        if self.interframe_diff.len() != n - 1 {
            return Err(format!("expected {} interframe diffs, found {}", n - 1, self.interframe_diff.len()));
        }
        for (b, w) in self.black_ratio.iter().zip(&self.white_ratio) {
            if !(0.0..=1.0).contains(b) || !(0.0..=1.0).contains(w) || b + w > 1.0 + 1e-12 {
                return Err("black/white ratios must lie in [0,1] and sum to at most 1".into());
            }
        }
        let b = self.border;
        if 2 * b.top.max(b.bottom) >= self.height.max(1) && b.top.max(b.bottom) > 0
            || 2 * b.left.max(b.right) >= self.width.max(1) && b.left.max(b.right) > 0
        {
            return Err("border widths must stay below half the frame".into());
        }
        Ok(())
    }
}

fn check_shape(frames: &Array3<f32>) -> Result<(), PixelError> {
    if frames.is_empty() {
        Err(PixelError::EmptyInput)
    } else {
        Ok(())
    }
}

fn mean_std(values: ArrayView2<'_, f32>) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|v| f64::from(*v)).sum::<f64>() / n;
    let var = values.iter().map(|v| (f64::from(*v) - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-frame mean, population std and the fractions of pixels strictly below
/// `black_thr` / strictly above `white_thr`.
pub fn compute_luma_stats(frames: &Array3<f32>, black_thr: f64, white_thr: f64) -> Result<LumaStats, PixelError> {
    check_shape(frames)?;
    if !(0.0 <= black_thr && black_thr < white_thr && white_thr <= 1.0) {
        return Err(PixelError::InvalidThresholds);
    }
    let mut out = LumaStats { luma_mean: vec![], luma_std: vec![], black_ratio: vec![], white_ratio: vec![] };
    for frame in frames.outer_iter() {
        let n = frame.len() as f64;
        let (mean, std) = mean_std(frame);
        out.luma_mean.push(mean);
        out.luma_std.push(std);
        out.black_ratio.push(frame.iter().filter(|v| f64::from(**v) < black_thr).count() as f64 / n);
        out.white_ratio.push(frame.iter().filter(|v| f64::from(**v) > white_thr).count() as f64 / n);
    }
    Ok(out)
}

/// Population variance of one edge line across all frames.
fn line_variance(frames: &Array3<f32>, axis: Axis, index: usize) -> f64 {
    let line = frames.index_axis(axis, index);
    mean_std(line).1.powi(2)
}

fn edge_run(frames: &Array3<f32>, axis: Axis, from_end: bool, variance_eps: f64) -> u32 {
    let dim = frames.len_of(axis);
    let cap = (dim / 2).saturating_sub(1);
    let mut width = 0;
    while width < cap {
        let index = if from_end { dim - 1 - width } else { width };
        if line_variance(frames, axis, index) < variance_eps {
            width += 1;
        } else {
            break;
        }
    }
    width as u32
}

/// Widths of flat bands at each edge: a row or column belongs to the border
/// when its luma variance over space and time is below `variance_eps`.
/// Each width is capped at `floor(dim/2) - 1`.
pub fn detect_border(frames: &Array3<f32>, variance_eps: f64) -> Border {
    if frames.is_empty() {
        return Border::default();
    }
    Border {
        top: edge_run(frames, Axis(1), false, variance_eps),
        bottom: edge_run(frames, Axis(1), true, variance_eps),
        left: edge_run(frames, Axis(2), false, variance_eps),
        right: edge_run(frames, Axis(2), true, variance_eps),
    }
}

pub fn interframe_diff(frames: &Array3<f32>) -> Vec<f64> {
    (1..frames.len_of(Axis(0)))
        .map(|f| {
            let a = frames.slice(s![f - 1, .., ..]);
            let b = frames.slice(s![f, .., ..]);
            let n = a.len() as f64;
            a.iter().zip(b.iter()).map(|(x, y)| (f64::from(*x) - f64::from(*y)).abs()).sum::<f64>() / n
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    }
}

/// Indices whose difference exceeds `k` times the median difference.
pub fn detect_frame_jump(diffs: &[f64], k: f64) -> Vec<usize> {
    if diffs.is_empty() {
        return Vec::new();
    }
    let limit = k * median(diffs);
    diffs.iter().enumerate().filter(|(_, d)| **d > limit).map(|(i, _)| i).collect()
}

/// Thresholds used when turning raw luma into [`FrameStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsParams {
    pub black_thr: f64,
    pub white_thr: f64,
    pub border_variance_eps: f64,
}

pub fn compute_frame_stats(frames: &Array3<f32>, params: &StatsParams) -> Result<FrameStats, PixelError> {
    let luma = compute_luma_stats(frames, params.black_thr, params.white_thr)?;
    let (_, h, w) = frames.dim();
    Ok(FrameStats {
        width: w as u32,
        height: h as u32,
        luma_mean: luma.luma_mean,
        luma_std: luma.luma_std,
        black_ratio: luma.black_ratio,
        white_ratio: luma.white_ratio,
        border: detect_border(frames, params.border_variance_eps),
        interframe_diff: interframe_diff(frames),
    })
}
