//! Group-relative advantages and the clipped surrogate loss value.
//!
//! Only loss values are computed here; nothing updates model parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_CLIP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("group `{group_id}` has {size} reward(s); at least 2 are required")]
    GroupTooSmall { group_id: String, size: usize },
    #[error("group `{group_id}` has a non-finite reward at index {index}")]
    NonFiniteReward { group_id: String, index: usize },
    #[error("epsilon must be finite and positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("no samples")]
    EmptySamples,
    #[error("clip range must lie in (0, 1), got {0}")]
    InvalidClip(f64),
    #[error("sample {index}: ratio must be finite and positive, got {ratio}")]
    InvalidRatio { index: usize, ratio: f64 },
    #[error("sample {index}: advantage must be finite, got {advantage}")]
    NonFiniteAdvantage { index: usize, advantage: f64 },
}

impl GrpoError {
    pub fn kind(&self) -> &'static str {
        match self {
            GrpoError::GroupTooSmall { .. } => "group_too_small",
            GrpoError::NonFiniteReward { .. } => "non_finite_reward",
            GrpoError::InvalidEpsilon(_) => "invalid_epsilon",
            GrpoError::EmptySamples => "empty_samples",
            GrpoError::InvalidClip(_) => "invalid_clip",
            GrpoError::InvalidRatio { .. } => "invalid_ratio",
            GrpoError::NonFiniteAdvantage { .. } => "non_finite_advantage",
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGroup {
    pub group_id: String,
    pub rewards: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl RewardGroup {
    pub fn new(group_id: impl Into<String>, rewards: Vec<f64>) -> Self {
        RewardGroup {
            group_id: group_id.into(),
            rewards,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageBatch {
    pub group_id: String,
    pub advantages: Vec<f64>,
    pub mu: f64,
    /// Population standard deviation.
    pub sigma: f64,
}

/// `A_i = (r_i - mu) / (sigma + epsilon)` with the population standard
/// deviation.
///
/// Deviations are taken relative to the first reward before averaging, so the
/// result depends only on the differences `r_i - r_0`. A constant group
/// therefore gets exactly zero advantages, and a shift that keeps those
/// differences exact leaves the advantages bit-identical.
pub fn group_advantages(group: &RewardGroup) -> Result<AdvantageBatch, GrpoError> {
    let size = group.rewards.len();
    if size < 2 {
        return Err(GrpoError::GroupTooSmall {
            group_id: group.group_id.clone(),
            size,
        });
    }
    if let Some(index) = group.rewards.iter().position(|r| !r.is_finite()) {
        return Err(GrpoError::NonFiniteReward {
            group_id: group.group_id.clone(),
            index,
        });
    }
    if !(group.epsilon.is_finite() && group.epsilon > 0.0) {
        return Err(GrpoError::InvalidEpsilon(group.epsilon));
    }

    let pivot = group.rewards[0];
    let shifted: Vec<f64> = group.rewards.iter().map(|r| r - pivot).collect();
    let n = size as f64;
    let shifted_mean = shifted.iter().sum::<f64>() / n;
    let deviations: Vec<f64> = shifted.iter().map(|d| d - shifted_mean).collect();
    let sigma = (deviations.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let denominator = sigma + group.epsilon;
    Ok(AdvantageBatch {
        group_id: group.group_id.clone(),
        advantages: deviations.iter().map(|d| d / denominator).collect(),
        mu: pivot + shifted_mean,
        sigma,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyRatioSample {
    /// `pi_theta(y|x) / pi_theta_old(y|x)`.
    pub ratio: f64,
    pub advantage: f64,
}

impl PolicyRatioSample {
    /// Builds the ratio as `exp(log_prob - old_log_prob)`.
    pub fn from_log_probs(log_prob: f64, old_log_prob: f64, advantage: f64) -> Self {
        PolicyRatioSample {
            ratio: (log_prob - old_log_prob).exp(),
            advantage,
        }
    }

    /// `min(ratio * A, clip(ratio, 1 - c, 1 + c) * A)`.
    pub fn surrogate(&self, clip: f64) -> f64 {
        let clipped = self.ratio.clamp(1.0 - clip, 1.0 + clip);
        (self.ratio * self.advantage).min(clipped * self.advantage)
    }
}

/// `-(1/G) * sum of per-sample clipped surrogates`.
pub fn grpo_loss(samples: &[PolicyRatioSample], clip: f64) -> Result<f64, GrpoError> {
    if samples.is_empty() {
        return Err(GrpoError::EmptySamples);
    }
    if !(clip > 0.0 && clip < 1.0) {
        return Err(GrpoError::InvalidClip(clip));
    }
    for (index, sample) in samples.iter().enumerate() {
        if !(sample.ratio.is_finite() && sample.ratio > 0.0) {
            return Err(GrpoError::InvalidRatio {
                index,
                ratio: sample.ratio,
            });
        }
        if !sample.advantage.is_finite() {
            return Err(GrpoError::NonFiniteAdvantage {
                index,
                advantage: sample.advantage,
            });
        }
    }
    let total: f64 = samples.iter().map(|s| s.surrogate(clip)).sum();
    Ok(-total / samples.len() as f64)
}
