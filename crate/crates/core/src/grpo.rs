//! Training-signal math: per-frame group-relative advantages, weighted
//! multi-reward totals, the first-frame hand gate, multi-clip rollout plans
//! and flow-matching targets.
//!
//! Rewards are laid out as `r[i][k][j]`: sample `i` of the group, reward model
//! `k`, temporal partition `j`. Each `(k, j)` cell is centred on its group mean
//! and divided by a stabilised standard deviation, by default the largest
//! per-partition group std of reward `k`:
//!
//! ```text
//! A[i][k][j] = (r[i][k][j] - mean_i r[.][k][j]) / max(max_j std_i r[.][k][j], eps_floor)
//! total[i][j] = sum_k w[k] * A[i][k][j]
//! ```

use ndarray::{Array2, Array3, ArrayD, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;

pub const DEFAULT_EPS_FLOOR: f64 = 1e-6;
pub const DEFAULT_MAX_CLIPS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum GrpoError {
    #[error("non-finite reward at sample {sample}, reward {reward}, partition {partition}")]
    NonFiniteReward { sample: usize, reward: usize, partition: usize },
    #[error("expected {expected} weights, got {found}")]
    WeightLengthMismatch { expected: usize, found: usize },
    #[error("weights must be finite")]
    NonFiniteWeight,
    #[error("reward tensor must have at least one sample, reward and partition")]
    EmptyTensor,
    #[error("eps_floor must be positive and finite")]
    InvalidEpsFloor,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("t = {0} lies outside [0, 1]")]
    TimeOutOfRange(f64),
}

/// How the per-reward normalising std is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Largest group std over all partitions of the reward.
    #[default]
    MaxOverPartitions,
    /// Each partition uses its own group std.
    PerPartition,
}

/// Rewards `G x K x J` with one weight per reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTensor {
    values: Array3<f64>,
    weights: Vec<f64>,
}

impl RewardTensor {
    pub fn new(values: Array3<f64>, weights: Vec<f64>) -> Result<Self, GrpoError> {
        let (g, k, j) = values.dim();
        if g == 0 || k == 0 || j == 0 {
            return Err(GrpoError::EmptyTensor);
        }
        if weights.len() != k {
            return Err(GrpoError::WeightLengthMismatch { expected: k, found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(GrpoError::NonFiniteWeight);
        }
        Ok(Self { values, weights })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageTensor {
    /// `G x K x J` per-reward advantages.
    pub per_reward: Array3<f64>,
    /// `G x J` weighted totals.
    pub total: Array2<f64>,
}

/// Population std of each `(k, j)` group, shape `K x J`.
fn group_std(values: &Array3<f64>, means: &Array2<f64>) -> Array2<f64> {
    let g = values.len_of(Axis(0)) as f64;
    let mut var = Array2::<f64>::zeros(means.dim());
    for sample in values.outer_iter() {
        Zip::from(&mut var).and(&sample).and(means).for_each(|v, &r, &m| *v += (r - m) * (r - m));
    }
    var.mapv(|v| (v / g).sqrt())
}

/// Group-relative advantages for every reward and partition.
pub fn per_frame_advantage(
    rewards: &RewardTensor,
    eps_floor: f64,
    mode: SigmaMode,
) -> Result<Array3<f64>, GrpoError> {
    if !(eps_floor.is_finite() && eps_floor > 0.0) {
        return Err(GrpoError::InvalidEpsFloor);
    }
    let values = &rewards.values;
    if let Some(((i, k, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(GrpoError::NonFiniteReward { sample: i, reward: k, partition: j });
    }
    let means = values.mean_axis(Axis(0)).expect("non-empty sample axis");
    let stds = group_std(values, &means);
    let (_, rewards_k, partitions) = values.dim();
    let mut denom = Array2::<f64>::zeros((rewards_k, partitions));
    for k in 0..rewards_k {
        let row = stds.row(k);
        let max_std = row.iter().cloned().fold(0.0f64, f64::max);
        for j in 0..partitions {
            let sigma = match mode {
                SigmaMode::MaxOverPartitions => max_std,
                SigmaMode::PerPartition => row[j],
            };
            denom[[k, j]] = sigma.max(eps_floor);
        }
    }
    let mut out = values.clone();
    for mut sample in out.outer_iter_mut() {
        Zip::from(&mut sample).and(&means).and(&denom).for_each(|r, &m, &d| *r = (*r - m) / d);
    }
    Ok(out)
}

/// `total[i][j] = sum_k w[k] * A[i][k][j]`.
pub fn total_advantage(per_reward: &Array3<f64>, weights: &[f64]) -> Result<Array2<f64>, GrpoError> {
    let (g, k, j) = per_reward.dim();
    if weights.len() != k {
        return Err(GrpoError::WeightLengthMismatch { expected: k, found: weights.len() });
    }
    let mut total = Array2::<f64>::zeros((g, j));
    for (kk, w) in weights.iter().enumerate() {
        total.scaled_add(*w, &per_reward.index_axis(Axis(1), kk));
    }
    Ok(total)
}

pub fn advantages(rewards: &RewardTensor, eps_floor: f64, mode: SigmaMode) -> Result<AdvantageTensor, GrpoError> {
    let per_reward = per_frame_advantage(rewards, eps_floor, mode)?;
    let total = total_advantage(&per_reward, &rewards.weights)?;
    Ok(AdvantageTensor { per_reward, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandDetection {
    pub hands_found: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandGate {
    pub prioritized: bool,
}

/// Conditioning frames with confidently detected hands are prioritised.
pub fn hand_presence_gate(detection: HandDetection, min_conf: f64) -> HandGate {
    HandGate { prioritized: detection.hands_found && detection.confidence >= min_conf }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutPlan {
    pub clip_count: usize,
    pub optimized_clip_index: usize,
    pub context_clip_indices: Vec<usize>,
}

impl RolloutPlan {
    pub fn with_clips(clip_count: usize) -> Self {
        assert!(clip_count >= 1);
        Self {
            clip_count,
            optimized_clip_index: clip_count - 1,
            context_clip_indices: (0..clip_count - 1).collect(),
        }
    }
}

/// Draws a clip count uniformly from `1..=max_clips`; only the last clip is optimised.
pub fn plan_multiclip_rollout(max_clips: usize, seed: u64) -> RolloutPlan {
    assert!(max_clips >= 1, "max_clips must be at least 1");
    let mut rng = rng_for(seed, &["rollout"]);
    RolloutPlan::with_clips(rng.random_range(1..=max_clips))
}

/// Clean latent, noise and timestep for one flow-matching example.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPair {
    x0: ArrayD<f64>,
    eps: ArrayD<f64>,
    t: f64,
}

impl LatentPair {
    pub fn new(x0: ArrayD<f64>, eps: ArrayD<f64>, t: f64) -> Result<Self, GrpoError> {
        if x0.shape() != eps.shape() {
            return Err(GrpoError::ShapeMismatch(x0.shape().to_vec(), eps.shape().to_vec()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(GrpoError::TimeOutOfRange(t));
        }
        Ok(Self { x0, eps, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn with_t(&self, t: f64) -> Result<Self, GrpoError> {
        Self::new(self.x0.clone(), self.eps.clone(), t)
    }
}

/// `x_t = (1 - t) x0 + t eps`.
pub fn flow_interpolate(pair: &LatentPair) -> ArrayD<f64> {
    let t = pair.t;
    Zip::from(&pair.x0).and(&pair.eps).map_collect(|&x, &e| (1.0 - t) * x + t * e)
}

/// `v = x0 - eps`, the velocity the model regresses.
pub fn velocity_target(pair: &LatentPair) -> ArrayD<f64> {
    &pair.x0 - &pair.eps
}
