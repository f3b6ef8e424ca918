//! Group-relative advantages, the clipped GRPO surrogate with a KL penalty,
//! and the distillation NLL. Everything operates on caller-supplied token
//! log-probabilities; no model code lives here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GROUP_SIZE: usize = 4;
/// Not reported for the reference runs; conventional GRPO default.
pub const DEFAULT_CLIP_EPS: f64 = 0.2;
/// Not reported for the reference runs; conventional GRPO default.
pub const DEFAULT_KL_BETA: f64 = 0.04;
pub const STD_FLOOR: f64 = 1e-8;

/// `(r_i - mean) / std` with the population standard deviation. A group
/// whose std falls below `1e-8` gets all-zero advantages.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::InvalidInput(format!(
            "group needs at least 2 rewards, got {g}"
        )));
    }
    if let Some(i) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(Error::InvalidInput(format!("reward {i} is not finite")));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    if std < STD_FLOOR {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Per-token log-probabilities with a 0/1 mask; masked-out entries are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub values: Vec<f64>,
    pub mask: Vec<u8>,
}

impl TokenLogProbs {
    pub fn new(values: Vec<f64>, mask: Vec<u8>) -> Result<Self> {
        let t = Self { values, mask };
        t.check()?;
        Ok(t)
    }

    /// All positions masked in.
    pub fn dense(values: Vec<f64>) -> Self {
        let mask = vec![1; values.len()];
        Self { values, mask }
    }

    fn check(&self) -> Result<()> {
        if self.values.len() != self.mask.len() {
            return Err(Error::InvalidInput(format!(
                "{} values but {} mask entries",
                self.values.len(),
                self.mask.len()
            )));
        }
        if let Some(i) = self.mask.iter().position(|&m| m > 1) {
            return Err(Error::InvalidInput(format!("mask entry {i} is not 0 or 1")));
        }
        if let Some(i) = self.masked().position(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "masked log-prob {i} is not finite"
            )));
        }
        Ok(())
    }

    /// `(index, value)` for masked-in positions.
    pub fn masked(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .filter(|(_, (_, &m))| m == 1)
            .map(|(i, (&v, _))| (i, v))
    }

    pub fn masked_sum(&self) -> f64 {
        self.masked().map(|(_, v)| v).sum()
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m == 1).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioMode {
    /// One importance ratio per completion from the summed log-ratio.
    #[default]
    Sequence,
    /// Per-token ratios, surrogate averaged over masked tokens.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoParams {
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub group_size: usize,
    pub ratio_mode: RatioMode,
}

impl Default for GrpoParams {
    fn default() -> Self {
        Self {
            clip_eps: DEFAULT_CLIP_EPS,
            kl_beta: DEFAULT_KL_BETA,
            group_size: DEFAULT_GROUP_SIZE,
            ratio_mode: RatioMode::Sequence,
        }
    }
}

/// Log-probabilities of one sampled completion under the current, old, and
/// reference policies. The mask of `new` selects the scored tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLogProbs {
    pub new: TokenLogProbs,
    pub old: TokenLogProbs,
    pub reference: TokenLogProbs,
}

/// `min(s * A, clip(s, 1 - eps, 1 + eps) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Mean over masked tokens of `exp(ref - new) - (ref - new) - 1`; always >= 0.
pub fn kl_estimate(new: &TokenLogProbs, reference: &TokenLogProbs) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, v) in new.masked() {
        let d = reference.values[i] - v;
        sum += d.exp() - d - 1.0;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn check_sample(s: &SampleLogProbs, idx: usize) -> Result<()> {
    s.new.check()?;
    let len = s.new.values.len();
    for (name, t) in [("old", &s.old), ("reference", &s.reference)] {
        if t.values.len() != len {
            return Err(Error::InvalidInput(format!(
                "sample {idx}: {name} has {} tokens, new has {len}",
                t.values.len()
            )));
        }
        for (i, _) in s.new.masked() {
            if !t.values[i].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sample {idx}: {name} log-prob {i} is not finite"
                )));
            }
        }
    }
    Ok(())
}

/// Negated GRPO objective (a loss to minimize) averaged over the group.
pub fn grpo_objective(
    samples: &[SampleLogProbs],
    advantages: &[f64],
    params: &GrpoParams,
) -> Result<f64> {
    if samples.len() != advantages.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples but {} advantages",
            samples.len(),
            advantages.len()
        )));
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty group".into()));
    }
    if !(params.clip_eps.is_finite() && params.kl_beta.is_finite()) {
        return Err(Error::InvalidInput(
            "clip_eps and kl_beta must be finite".into(),
        ));
    }
    if let Some(i) = advantages.iter().position(|a| !a.is_finite()) {
        return Err(Error::InvalidInput(format!("advantage {i} is not finite")));
    }
    let mut total = 0.0;
    for (idx, (s, &adv)) in samples.iter().zip(advantages).enumerate() {
        check_sample(s, idx)?;
        let surrogate = match params.ratio_mode {
            RatioMode::Sequence => {
                let log_ratio: f64 = s.new.masked().map(|(i, v)| v - s.old.values[i]).sum();
                clipped_surrogate(log_ratio.exp(), adv, params.clip_eps)
            }
            RatioMode::Token => {
                let n = s.new.masked_count();
                if n == 0 {
                    clipped_surrogate(1.0, adv, params.clip_eps)
                } else {
                    s.new
                        .masked()
                        .map(|(i, v)| {
                            clipped_surrogate((v - s.old.values[i]).exp(), adv, params.clip_eps)
                        })
                        .sum::<f64>()
                        / n as f64
                }
            }
        };
        total += surrogate - params.kl_beta * kl_estimate(&s.new, &s.reference);
    }
    Ok(-total / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SftNormalization {
    /// Divide by the number of supervised tokens.
    #[default]
    PerToken,
    /// Plain sum over supervised tokens.
    Sum,
}

/// Negative log-likelihood over the supervised reasoning and answer tokens.
pub fn sft_loss(
    reasoning: &TokenLogProbs,
    answer: &TokenLogProbs,
    norm: SftNormalization,
) -> Result<f64> {
    reasoning.check()?;
    answer.check()?;
    let sum = reasoning.masked_sum() + answer.masked_sum();
    let loss = match norm {
        SftNormalization::Sum => -sum,
        SftNormalization::PerToken => {
            let n = reasoning.masked_count() + answer.masked_count();
            if n == 0 {
                0.0
            } else {
                -sum / n as f64
            }
        }
    };
    // -0.0 -> 0.0
    Ok(loss + 0.0)
}
