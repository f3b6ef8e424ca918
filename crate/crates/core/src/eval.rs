//! HICO-DET style mAP over language-emitted predictions.
//!
//! Each predicted instance expands into one `(human, object, category)`
//! triplet per valid verb. A triplet is a true positive when an unmatched
//! ground-truth pair of the same category overlaps it with IoU >= 0.5 on both
//! boxes. AP is the all-point interpolated area under the precision envelope.
//! The table reports Default (all test images) and Known Object (only images
//! that contain the category's object) over Full / Rare / Non-Rare.
//!
//! Text outputs carry no confidence. Scores are synthesized from output
//! order (earlier instance = higher score) or held constant; neither rule is
//! authoritative. Ties are broken by dataset image order, then output order.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{iou, pair_similarity, BBox};
use crate::parser::ParsedCompletion;
use crate::vocab::{HoiId, Vocabulary};

pub const IOU_THRESHOLD: f64 = 0.5;
/// Score decrement per output position in [`ScoreMode::OutputOrder`].
pub const RANK_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    #[default]
    OutputOrder,
    Constant,
}

impl std::str::FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "output-order" | "order" => Ok(Self::OutputOrder),
            "constant" => Ok(Self::Constant),
            other => Err(format!(
                "unknown score mode {other:?} (expected output-order or constant)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTriplet {
    pub image_id: String,
    pub human: BBox,
    pub object: BBox,
    pub hoi_category: HoiId,
    pub score: f64,
}

/// Expand parsed instances into scored triplets. Instances without both
/// boxes or with an unknown object are dropped, as are verbs that do not
/// form a valid category with the object. Repeated categories within one
/// instance collapse to one triplet.
pub fn expand_triplets(
    parsed: &ParsedCompletion,
    image_id: &str,
    vocab: &Vocabulary,
    mode: ScoreMode,
) -> Vec<PredictionTriplet> {
    let mut out = Vec::new();
    for (rank, inst) in parsed.instances.iter().enumerate() {
        let Some((human, object)) = inst.boxes() else {
            continue;
        };
        let Some(obj) = inst
            .object_class
            .as_deref()
            .and_then(|n| vocab.resolve_object(n))
        else {
            continue;
        };
        let score = match mode {
            ScoreMode::OutputOrder => 1.0 - rank as f64 * RANK_STEP,
            ScoreMode::Constant => 1.0,
        };
        let mut seen = BTreeSet::new();
        for verb in &inst.verb_classes {
            let Some(cat) = vocab
                .resolve_verb(verb)
                .and_then(|v| vocab.hoi_category(v, obj))
            else {
                continue;
            };
            if seen.insert(cat) {
                out.push(PredictionTriplet {
                    image_id: image_id.to_string(),
                    human,
                    object,
                    hoi_category: cat,
                    score,
                });
            }
        }
    }
    out
}

/// Parse and expand `(image_id, completion)` records in order.
pub fn triplets_from_completions<'a>(
    records: impl IntoIterator<Item = (&'a str, &'a str)>,
    vocab: &Vocabulary,
    mode: ScoreMode,
) -> Vec<PredictionTriplet> {
    records
        .into_iter()
        .flat_map(|(id, text)| {
            expand_triplets(&crate::parser::parse_completion(text), id, vocab, mode)
        })
        .collect()
}

/// Greedy matching inside one image for one category. `preds` must already
/// be sorted by descending score. Returns one TP flag per prediction.
pub fn match_image(preds: &[(BBox, BBox)], gts: &[(BBox, BBox)]) -> Vec<bool> {
    let mut used = vec![false; gts.len()];
    preds
        .iter()
        .map(|(ph, po)| {
            let mut best: Option<(usize, f64)> = None;
            for (j, (gh, go)) in gts.iter().enumerate() {
                if used[j] || iou(ph, gh) < IOU_THRESHOLD || iou(po, go) < IOU_THRESHOLD {
                    continue;
                }
                let s = pair_similarity((ph, po), (gh, go));
                if best.is_none_or(|(_, bs)| s > bs) {
                    best = Some((j, s));
                }
            }
            match best {
                Some((j, _)) => {
                    used[j] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// All-point interpolated AP. `None` when there is no ground truth.
pub fn average_precision(flags: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut recall = Vec::with_capacity(flags.len() + 2);
    let mut precision = Vec::with_capacity(flags.len() + 2);
    recall.push(0.0);
    precision.push(0.0);
    let (mut tp, mut fp) = (0usize, 0usize);
    for &f in flags {
        if f {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    recall.push(1.0);
    precision.push(0.0);
    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 0..recall.len() - 1 {
        if recall[i + 1] != recall[i] {
            ap += (recall[i + 1] - recall[i]) * precision[i + 1];
        }
    }
    Some(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MapCells {
    pub full: f64,
    pub rare: f64,
    pub non_rare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryResult {
    pub category: HoiId,
    pub verb: String,
    pub object: String,
    pub rare: bool,
    pub n_gt: usize,
    /// AP in [0, 1].
    pub ap_default: f64,
    pub ap_known_object: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    /// mAP cells in percent.
    pub default: MapCells,
    pub known_object: MapCells,
    /// Categories with at least one ground-truth instance, per subset.
    pub categories_evaluated: CategoryCounts,
    /// Only categories with ground truth, ascending id.
    pub per_category: Vec<CategoryResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub full: usize,
    pub rare: usize,
    pub non_rare: usize,
}

struct Ranked {
    score: f64,
    image_pos: usize,
    order: usize,
    human: BBox,
    object: BBox,
}

fn category_ap(
    preds: &[Ranked],
    gt_by_image: &HashMap<usize, Vec<(BBox, BBox)>>,
    n_gt: usize,
    keep_image: impl Fn(usize) -> bool,
) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let mut by_image: HashMap<usize, Vec<&Ranked>> = HashMap::new();
    for p in preds.iter().filter(|p| keep_image(p.image_pos)) {
        by_image.entry(p.image_pos).or_default().push(p);
    }
    let mut flagged: Vec<(&Ranked, bool)> = Vec::new();
    let empty = Vec::new();
    for (img, mut list) in by_image {
        list.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.order.cmp(&b.order)));
        let boxes: Vec<(BBox, BBox)> = list.iter().map(|p| (p.human, p.object)).collect();
        let flags = match_image(&boxes, gt_by_image.get(&img).unwrap_or(&empty));
        flagged.extend(list.into_iter().zip(flags));
    }
    flagged.sort_by(|(a, _), (b, _)| {
        b.score
            .total_cmp(&a.score)
            .then(a.image_pos.cmp(&b.image_pos))
            .then(a.order.cmp(&b.order))
    });
    let flags: Vec<bool> = flagged.into_iter().map(|(_, f)| f).collect();
    average_precision(&flags, n_gt)
}

fn mean_percent<'a>(aps: impl Iterator<Item = &'a Option<f64>>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for ap in aps.flatten() {
        sum += ap;
        n += 1;
    }
    if n == 0 {
        (0.0, 0)
    } else {
        (100.0 * sum / n as f64, n)
    }
}

fn cells(aps: &[Option<f64>], rare: &BTreeSet<HoiId>) -> (MapCells, CategoryCounts) {
    let (full, nf) = mean_percent(aps.iter());
    let (r, nr) = mean_percent(
        aps.iter()
            .enumerate()
            .filter(|(c, _)| rare.contains(c))
            .map(|(_, a)| a),
    );
    let (nn, nnr) = mean_percent(
        aps.iter()
            .enumerate()
            .filter(|(c, _)| !rare.contains(c))
            .map(|(_, a)| a),
    );
    (
        MapCells {
            full,
            rare: r,
            non_rare: nn,
        },
        CategoryCounts {
            full: nf,
            rare: nr,
            non_rare: nnr,
        },
    )
}

/// Evaluate triplets against a test dataset. Predictions naming images
/// that are not in the dataset are rejected.
pub fn evaluate(
    preds: &[PredictionTriplet],
    ds: &Dataset,
    rare: &BTreeSet<HoiId>,
) -> Result<EvalTable> {
    let vocab = &ds.vocab;
    let n_cat = vocab.num_categories();

    let mut unknown: BTreeSet<&str> = BTreeSet::new();
    let mut per_cat: Vec<Vec<Ranked>> = (0..n_cat).map(|_| Vec::new()).collect();
    for (order, p) in preds.iter().enumerate() {
        let Some(image_pos) = ds.position(&p.image_id) else {
            unknown.insert(&p.image_id);
            continue;
        };
        if p.hoi_category >= n_cat {
            return Err(Error::InvalidInput(format!(
                "prediction {order} has category {} (vocabulary has {n_cat})",
                p.hoi_category
            )));
        }
        if !p.score.is_finite() {
            return Err(Error::InvalidInput(format!(
                "prediction {order} has a non-finite score"
            )));
        }
        per_cat[p.hoi_category].push(Ranked {
            score: p.score,
            image_pos,
            order,
            human: p.human,
            object: p.object,
        });
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownImages(
            unknown.into_iter().map(str::to_owned).collect(),
        ));
    }

    let mut gt: Vec<HashMap<usize, Vec<(BBox, BBox)>>> = vec![HashMap::new(); n_cat];
    let mut n_gt = vec![0usize; n_cat];
    for (pos, img) in ds.images.iter().enumerate() {
        for (pair_idx, cat) in img.triplets(vocab) {
            let p = &img.pairs[pair_idx];
            gt[cat].entry(pos).or_default().push((p.human, p.object));
            n_gt[cat] += 1;
        }
    }
    let image_objects: Vec<_> = ds.images.iter().map(|i| i.object_classes()).collect();

    let results: Vec<(Option<f64>, Option<f64>)> = (0..n_cat)
        .into_par_iter()
        .map(|c| {
            let obj = vocab.category_object(c);
            let default = category_ap(&per_cat[c], &gt[c], n_gt[c], |_| true);
            let known = category_ap(&per_cat[c], &gt[c], n_gt[c], |pos| {
                image_objects[pos].contains(&obj)
            });
            (default, known)
        })
        .collect();
    let (per_default, per_known): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let (default, counts) = cells(&per_default, rare);
    let (known_object, _) = cells(&per_known, rare);
    let per_category = (0..n_cat)
        .filter_map(|c| {
            let (v, o) = vocab.hoi_triples()[c];
            Some(CategoryResult {
                category: c,
                verb: vocab.verb_name(v).to_string(),
                object: vocab.object_name(o).to_string(),
                rare: rare.contains(&c),
                n_gt: n_gt[c],
                ap_default: per_default[c]?,
                ap_known_object: per_known[c]?,
            })
        })
        .collect();
    Ok(EvalTable {
        default,
        known_object,
        categories_evaluated: counts,
        per_category,
    })
}

impl EvalTable {
    pub fn category(&self, c: HoiId) -> Option<&CategoryResult> {
        self.per_category.iter().find(|r| r.category == c)
    }

    /// Pretty JSON with a trailing newline; byte-stable for a given input.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    /// Six-column plain-text table, two decimals.
    pub fn to_text_table(&self) -> String {
        let mut s = String::new();
        let d = &self.default;
        let k = &self.known_object;
        let _ = writeln!(s, "|{:^26}|{:^26}|", "Default", "Known Object");
        let _ = writeln!(
            s,
            "|{:>8}|{:>8}|{:>8}|{:>8}|{:>8}|{:>8}|",
            "Full", "Rare", "Non-Rare", "Full", "Rare", "Non-Rare"
        );
        let _ = writeln!(
            s,
            "|{:>8.2}|{:>8.2}|{:>8.2}|{:>8.2}|{:>8.2}|{:>8.2}|",
            d.full, d.rare, d.non_rare, k.full, k.rare, k.non_rare
        );
        s
    }
}
