//! Rule-based rewards for one completion scored against one annotated image.
//!
//! Four families are combined into the total:
//!
//! * format: think tag, per-instance box/key validity, and a key-count
//!   penalty `alpha = 4 / (4 + |keys - 4|)`;
//! * object label: sequential drop-on-match against the ground-truth object
//!   multiset;
//! * verb label: per-instance hit ratio against the ground-truth verb
//!   multiset, dropping matched verbs after each instance;
//! * pair IoU: one-to-one Hungarian matching on mean human/object IoU.
//!
//! A completion with no `<answer>` block scores zero everywhere.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::GtImage;
use crate::geometry::{iou, pair_similarity, BBox};
use crate::hungarian::hungarian_match;
use crate::parser::{
    parse_completion, CanonicalKey, HoiInstance, ParsedCompletion, CANONICAL_KEY_COUNT,
};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    /// Duplicate only when both the human and the object box overlap one earlier pair.
    #[default]
    PairBoth,
    /// Duplicate when either box overlaps the corresponding box of an earlier pair.
    EitherBox,
}

impl std::str::FromStr for DedupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pair-both" => Ok(Self::PairBoth),
            "either-box" => Ok(Self::EitherBox),
            other => Err(format!(
                "unknown dedup mode {other:?} (expected pair-both or either-box)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_tag: f64,
    pub w_b: f64,
    pub w_ko: f64,
    pub w_kv: f64,
    pub dedup_iou_threshold: f64,
    pub dedup_mode: DedupMode,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_tag: 0.2,
            w_b: 0.2,
            w_ko: 0.2,
            w_kv: 0.2,
            dedup_iou_threshold: 0.5,
            dedup_mode: DedupMode::PairBoth,
        }
    }
}

impl RewardWeights {
    pub fn format_max(&self) -> f64 {
        self.w_tag + self.w_b + self.w_ko + self.w_kv
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("w_tag", self.w_tag),
            ("w_b", self.w_b),
            ("w_ko", self.w_ko),
            ("w_kv", self.w_kv),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(format!(
                    "{name} must be a non-negative finite number, got {w}"
                ));
            }
        }
        if !self.dedup_iou_threshold.is_finite() {
            return Err("dedup_iou_threshold must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceReward {
    pub alpha: f64,
    pub r_b: f64,
    pub r_ko: f64,
    pub r_kv: f64,
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred_index: usize,
    pub gt_index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_tag: f64,
    pub r_format: f64,
    pub r_lo: f64,
    pub r_lv: f64,
    pub r_iou: f64,
    pub total: f64,
    pub per_instance: Vec<InstanceReward>,
    pub matching: Vec<MatchedPair>,
}

/// `N_k / (N_k + |keys - N_k|)` with `N_k = 4`.
pub fn key_penalty(key_count: usize) -> f64 {
    let nk = CANONICAL_KEY_COUNT as f64;
    nk / (nk + (key_count as f64 - nk).abs())
}

/// Flags instances whose boxes repeat an earlier accepted pair. Instances
/// without both boxes are flagged as well.
pub fn dedup_scan(instances: &[HoiInstance], weights: &RewardWeights) -> Vec<bool> {
    let thr = weights.dedup_iou_threshold;
    let mut accepted: Vec<(BBox, BBox)> = Vec::new();
    instances
        .iter()
        .map(|inst| {
            let Some((h, o)) = inst.boxes() else {
                return true;
            };
            let collides = accepted.iter().any(|(ah, ao)| {
                let hi = iou(&h, ah) > thr;
                let oi = iou(&o, ao) > thr;
                match weights.dedup_mode {
                    DedupMode::PairBoth => hi && oi,
                    DedupMode::EitherBox => hi || oi,
                }
            });
            if !collides {
                accepted.push((h, o));
            }
            collides
        })
        .collect()
}

fn denominator(n_gt: usize, n_pred: usize) -> f64 {
    n_gt.max(n_pred).max(1) as f64
}

/// Distinct in-vocabulary verbs over all predicted verbs; 0 without the key
/// or with an empty list.
fn verb_key_reward(inst: &HoiInstance, vocab: &Vocabulary) -> f64 {
    if !inst.has_key(CanonicalKey::VerbClass) || inst.verb_classes.is_empty() {
        return 0.0;
    }
    let distinct: BTreeSet<usize> = inst
        .verb_classes
        .iter()
        .filter_map(|v| vocab.resolve_verb(v))
        .collect();
    distinct.len() as f64 / inst.verb_classes.len() as f64
}

pub struct FormatReward {
    pub r_tag: f64,
    pub r_format: f64,
    pub per_instance: Vec<InstanceReward>,
}

pub fn format_reward(
    parsed: &ParsedCompletion,
    gt: &GtImage,
    vocab: &Vocabulary,
    weights: &RewardWeights,
    dup_flags: &[bool],
) -> FormatReward {
    if !parsed.has_answer_tag {
        return FormatReward {
            r_tag: 0.0,
            r_format: 0.0,
            per_instance: vec![InstanceReward::default(); parsed.instances.len()],
        };
    }
    let r_tag = if parsed.has_think_tag { 1.0 } else { 0.0 };
    let per_instance: Vec<InstanceReward> = parsed
        .instances
        .iter()
        .zip(dup_flags)
        .map(|(inst, &duplicate)| {
            let alpha = key_penalty(inst.key_count);
            if duplicate {
                return InstanceReward {
                    alpha,
                    duplicate,
                    ..Default::default()
                };
            }
            let r_ko = match &inst.object_class {
                Some(name)
                    if inst.has_key(CanonicalKey::ObjectClass)
                        && vocab.resolve_object(name).is_some() =>
                {
                    1.0
                }
                _ => 0.0,
            };
            InstanceReward {
                alpha,
                // Not flagged implies both boxes are present and valid.
                r_b: 1.0,
                r_ko,
                r_kv: verb_key_reward(inst, vocab),
                duplicate,
            }
        })
        .collect();
    let sum: f64 = per_instance
        .iter()
        .map(|p| p.alpha * (weights.w_b * p.r_b + weights.w_ko * p.r_ko + weights.w_kv * p.r_kv))
        .sum();
    let r_format =
        weights.w_tag * r_tag + sum / denominator(gt.pairs.len(), parsed.instances.len());
    FormatReward {
        r_tag,
        r_format,
        per_instance,
    }
}

pub fn object_label_reward(
    parsed: &ParsedCompletion,
    gt: &GtImage,
    vocab: &Vocabulary,
    dup_flags: &[bool],
) -> f64 {
    if !parsed.has_answer_tag {
        return 0.0;
    }
    let mut remaining: HashMap<usize, usize> = HashMap::new();
    for p in &gt.pairs {
        *remaining.entry(p.object_class).or_default() += 1;
    }
    let mut sum = 0.0;
    for (inst, &dup) in parsed.instances.iter().zip(dup_flags) {
        if dup {
            continue;
        }
        let Some(id) = inst
            .object_class
            .as_deref()
            .and_then(|n| vocab.resolve_object(n))
        else {
            continue;
        };
        if let Some(count) = remaining.get_mut(&id).filter(|c| **c > 0) {
            *count -= 1;
            sum += key_penalty(inst.key_count);
        }
    }
    sum / denominator(gt.pairs.len(), parsed.instances.len())
}

pub fn verb_label_reward(
    parsed: &ParsedCompletion,
    gt: &GtImage,
    vocab: &Vocabulary,
    dup_flags: &[bool],
) -> f64 {
    if !parsed.has_answer_tag {
        return 0.0;
    }
    let mut remaining: HashMap<usize, usize> = HashMap::new();
    for p in &gt.pairs {
        for &v in &p.verb_classes {
            *remaining.entry(v).or_default() += 1;
        }
    }
    let mut sum = 0.0;
    for (inst, &dup) in parsed.instances.iter().zip(dup_flags) {
        if dup || inst.verb_classes.is_empty() {
            continue;
        }
        let resolved: Vec<Option<usize>> = inst
            .verb_classes
            .iter()
            .map(|v| vocab.resolve_verb(v))
            .collect();
        let hits = resolved
            .iter()
            .filter(|id| id.is_some_and(|id| remaining.get(&id).is_some_and(|&c| c > 0)))
            .count();
        let matched: BTreeSet<usize> = resolved
            .iter()
            .flatten()
            .copied()
            .filter(|id| remaining.get(id).is_some_and(|&c| c > 0))
            .collect();
        for id in matched {
            if let Some(c) = remaining.get_mut(&id) {
                *c -= 1;
            }
        }
        sum += key_penalty(inst.key_count) / inst.verb_classes.len() as f64 * hits as f64;
    }
    sum / denominator(gt.pairs.len(), parsed.instances.len())
}

/// Hungarian-matched mean pair IoU, normalized by the ground-truth pair count.
pub fn hoi_iou_reward(
    parsed: &ParsedCompletion,
    gt: &GtImage,
    dup_flags: &[bool],
) -> (f64, Vec<MatchedPair>) {
    if !parsed.has_answer_tag || gt.pairs.is_empty() {
        return (0.0, Vec::new());
    }
    let candidates: Vec<(usize, (BBox, BBox))> = parsed
        .instances
        .iter()
        .zip(dup_flags)
        .enumerate()
        .filter(|(_, (_, &dup))| !dup)
        .filter_map(|(i, (inst, _))| inst.boxes().map(|b| (i, b)))
        .collect();
    if candidates.is_empty() {
        return (0.0, Vec::new());
    }
    let sim: Vec<Vec<f64>> = candidates
        .iter()
        .map(|(_, (h, o))| {
            gt.pairs
                .iter()
                .map(|g| pair_similarity((h, o), (&g.human, &g.object)))
                .collect()
        })
        .collect();
    let cost: Vec<Vec<f64>> = sim
        .iter()
        .map(|row| row.iter().map(|s| 1.0 - s).collect())
        .collect();
    let assignment = hungarian_match(&cost).expect("similarities are finite");
    let matching: Vec<MatchedPair> = assignment
        .pairs
        .iter()
        .map(|&(r, c)| MatchedPair {
            pred_index: candidates[r].0,
            gt_index: c,
            similarity: sim[r][c],
        })
        .collect();
    let total: f64 = matching.iter().map(|m| m.similarity).sum();
    (total / gt.pairs.len() as f64, matching)
}

/// Score an already-parsed completion.
pub fn score_parsed(
    parsed: &ParsedCompletion,
    gt: &GtImage,
    vocab: &Vocabulary,
    weights: &RewardWeights,
) -> RewardBreakdown {
    if !parsed.has_answer_tag {
        return RewardBreakdown {
            per_instance: vec![InstanceReward::default(); parsed.instances.len()],
            ..Default::default()
        };
    }
    let dup_flags = dedup_scan(&parsed.instances, weights);
    let fmt = format_reward(parsed, gt, vocab, weights, &dup_flags);
    let r_lo = object_label_reward(parsed, gt, vocab, &dup_flags);
    let r_lv = verb_label_reward(parsed, gt, vocab, &dup_flags);
    let (r_iou, matching) = hoi_iou_reward(parsed, gt, &dup_flags);
    RewardBreakdown {
        r_tag: fmt.r_tag,
        r_format: fmt.r_format,
        r_lo,
        r_lv,
        r_iou,
        total: fmt.r_format + r_lo + r_lv + r_iou,
        per_instance: fmt.per_instance,
        matching,
    }
}

/// Parse and score one completion.
pub fn score_sample(
    text: &str,
    gt: &GtImage,
    vocab: &Vocabulary,
    weights: &RewardWeights,
) -> RewardBreakdown {
    score_parsed(&parse_completion(text), gt, vocab, weights)
}
