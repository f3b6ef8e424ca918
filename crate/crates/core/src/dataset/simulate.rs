//! Seeded synthetic policy: corrupts the canonical answer for an image so
//! reward behaviour can be checked against known amounts of noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{gt_to_answer, wrap_completion, GtImage};
use crate::geometry::BBox;
use crate::parser::ANSWER_CLOSE;
use crate::vocab::Vocabulary;

pub const SIMULATED_THINK: &str =
    "I identify each human in the image, analyze their actions, and determine the objects they interact with.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    /// Std of Gaussian corner jitter as a fraction of box width/height.
    pub box_jitter_sigma: f64,
    pub label_swap_prob: f64,
    pub verb_drop_prob: f64,
    pub instance_drop_prob: f64,
    pub instance_dup_prob: f64,
    pub format_break_prob: f64,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self::zero(0)
    }
}

impl NoiseProfile {
    pub fn zero(seed: u64) -> Self {
        Self {
            box_jitter_sigma: 0.0,
            label_swap_prob: 0.0,
            verb_drop_prob: 0.0,
            instance_drop_prob: 0.0,
            instance_dup_prob: 0.0,
            format_break_prob: 0.0,
            seed,
        }
    }

    /// Single-knob profile: jitter `level`, label swaps and verb drops with
    /// probability `level`, instance drops/duplicates at `level / 2`, format
    /// breaks at `level / 5`.
    pub fn at_level(level: f64, seed: u64) -> Self {
        Self {
            box_jitter_sigma: level,
            label_swap_prob: level.min(1.0),
            verb_drop_prob: level.min(1.0),
            instance_drop_prob: (level / 2.0).min(1.0),
            instance_dup_prob: (level / 2.0).min(1.0),
            format_break_prob: (level / 5.0).min(1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("label_swap_prob", self.label_swap_prob),
            ("verb_drop_prob", self.verb_drop_prob),
            ("instance_drop_prob", self.instance_drop_prob),
            ("instance_dup_prob", self.instance_dup_prob),
            ("format_break_prob", self.format_break_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.box_jitter_sigma.is_finite() && self.box_jitter_sigma >= 0.0) {
            return Err(format!(
                "box_jitter_sigma must be >= 0, got {}",
                self.box_jitter_sigma
            ));
        }
        Ok(())
    }
}

/// FNV-1a, used to derive per-sample seeds that are stable across platforms.
fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn sample_rng(seed: u64, image_id: &str, sample_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(&[
        &seed.to_le_bytes(),
        image_id.as_bytes(),
        &sample_index.to_le_bytes(),
    ]))
}

fn jitter(b: &BBox, sigma: f64, rng: &mut ChaCha8Rng, w: f64, h: f64) -> BBox {
    if sigma == 0.0 {
        return *b;
    }
    let mut draw = |scale: f64| {
        let sd = sigma * scale.max(1.0);
        Normal::new(0.0, sd).map(|n| n.sample(rng)).unwrap_or(0.0)
    };
    let (bw, bh) = (b.width(), b.height());
    BBox::new(
        b.x1 + draw(bw),
        b.y1 + draw(bh),
        b.x2 + draw(bw),
        b.y2 + draw(bh),
    )
    .clamp_to(w, h)
}

/// A corrupted completion for image `g`. With a zero profile this is exactly
/// the canonical answer wrapped in think/answer tags.
pub fn simulate_policy(
    g: &GtImage,
    vocab: &Vocabulary,
    noise: &NoiseProfile,
    sample_index: u64,
) -> String {
    let mut rng = sample_rng(noise.seed, &g.image_id, sample_index);
    let mut out = g.clone();
    let n_obj = vocab.objects().len();
    let n_verb = vocab.verbs().len();

    out.pairs
        .retain(|_| !rng.random_bool(noise.instance_drop_prob));
    for p in &mut out.pairs {
        p.human = jitter(
            &p.human,
            noise.box_jitter_sigma,
            &mut rng,
            g.width,
            g.height,
        );
        p.object = jitter(
            &p.object,
            noise.box_jitter_sigma,
            &mut rng,
            g.width,
            g.height,
        );
        if n_obj > 1 && rng.random_bool(noise.label_swap_prob) {
            let other = rng.random_range(0..n_obj - 1);
            p.object_class = if other >= p.object_class {
                other + 1
            } else {
                other
            };
        }
        let mut verbs = std::collections::BTreeSet::new();
        for &v in &p.verb_classes {
            if rng.random_bool(noise.verb_drop_prob) {
                continue;
            }
            if n_verb > 1 && rng.random_bool(noise.label_swap_prob) {
                let other = rng.random_range(0..n_verb - 1);
                verbs.insert(if other >= v { other + 1 } else { other });
            } else {
                verbs.insert(v);
            }
        }
        p.verb_classes = verbs;
    }
    let mut with_dups = Vec::with_capacity(out.pairs.len());
    for p in out.pairs.drain(..) {
        let dup = rng.random_bool(noise.instance_dup_prob);
        if dup {
            with_dups.push(p.clone());
        }
        with_dups.push(p);
    }
    out.pairs = with_dups;

    let text = wrap_completion(SIMULATED_THINK, &gt_to_answer(&out, vocab));
    if rng.random_bool(noise.format_break_prob) {
        // Answer tags lost: the JSON is left as bare text.
        text.replace("<answer>", "\n").replace(ANSWER_CLOSE, "")
    } else {
        text
    }
}
