//! Ground-truth annotations, dataset files, and everything built from them:
//! prompts, canonical answers, SFT records, teacher traces, and simulated
//! policy outputs.

pub mod answer;
pub mod hico;
pub mod prompt;
pub mod sft;
pub mod simulate;
pub mod traces;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::vocab::{HoiId, ObjectId, VerbId, Vocabulary};

pub use answer::{gt_to_answer, wrap_completion};

pub const SCHEMA_VERSION: u32 = 1;
/// Categories with fewer training instances than this are rare.
pub const RARE_THRESHOLD: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtPair {
    pub human: BBox,
    pub object: BBox,
    pub object_class: ObjectId,
    /// Sorted, non-empty.
    pub verb_classes: BTreeSet<VerbId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtImage {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub pairs: Vec<GtPair>,
}

impl GtImage {
    /// HOI category ids of every (pair, verb) in annotation order.
    pub fn triplets(&self, vocab: &Vocabulary) -> Vec<(usize, HoiId)> {
        let mut out = Vec::new();
        for (i, p) in self.pairs.iter().enumerate() {
            for &v in &p.verb_classes {
                if let Some(c) = vocab.hoi_category(v, p.object_class) {
                    out.push((i, c));
                }
            }
        }
        out
    }

    pub fn object_classes(&self) -> HashSet<ObjectId> {
        self.pairs.iter().map(|p| p.object_class).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnnotationFormat {
    #[default]
    Canonical,
    HicoJson,
}

impl std::str::FromStr for AnnotationFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(Self::Canonical),
            "hico_json" | "hico-json" => Ok(Self::HicoJson),
            other => Err(format!("unknown annotation format {other:?}")),
        }
    }
}

/// The versioned on-disk dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalFile {
    pub schema_version: u32,
    pub split: Split,
    pub images: Vec<GtImage>,
}

/// Problems found while loading; non-fatal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    /// `(record index, message)`.
    pub malformed: Vec<(usize, String)>,
    /// Images retained without a single valid pair.
    pub empty_images: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: Split,
    pub images: Vec<GtImage>,
    pub vocab: Vocabulary,
    index: HashMap<String, usize>,
}

impl Dataset {
    /// Builds the image-id index and validates every pair against `vocab`.
    pub fn new(split: Split, images: Vec<GtImage>, vocab: Vocabulary) -> Result<Self> {
        let mut index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if index.insert(img.image_id.clone(), i).is_some() {
                return Err(Error::Format(format!(
                    "duplicate image_id {:?}",
                    img.image_id
                )));
            }
            for (j, p) in img.pairs.iter().enumerate() {
                validate_pair(p, &vocab).map_err(|m| {
                    Error::Format(format!("image {:?} pair {j}: {m}", img.image_id))
                })?;
            }
        }
        Ok(Self {
            split,
            images,
            vocab,
            index,
        })
    }

    pub fn get(&self, image_id: &str) -> Option<&GtImage> {
        self.index.get(image_id).map(|&i| &self.images[i])
    }

    pub fn position(&self, image_id: &str) -> Option<usize> {
        self.index.get(image_id).copied()
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.images.iter().map(|i| i.pairs.len()).sum()
    }

    pub fn to_canonical(&self) -> CanonicalFile {
        CanonicalFile {
            schema_version: SCHEMA_VERSION,
            split: self.split,
            images: self.images.clone(),
        }
    }

    pub fn save_canonical(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &self.to_canonical())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

fn validate_pair(p: &GtPair, vocab: &Vocabulary) -> std::result::Result<(), String> {
    if p.object_class >= vocab.objects().len() {
        return Err(format!("object class {} out of range", p.object_class));
    }
    if p.verb_classes.is_empty() {
        return Err("empty verb set".into());
    }
    for &v in &p.verb_classes {
        if vocab.hoi_category(v, p.object_class).is_none() {
            return Err(format!(
                "({}, {}) is not a valid interaction",
                vocab.verbs().get(v).map_or("?", String::as_str),
                vocab.object_name(p.object_class)
            ));
        }
    }
    if !(p.human.is_finite() && p.object.is_finite()) {
        return Err("non-finite box".into());
    }
    Ok(())
}

/// Read a dataset file. Canonical files are validated as a whole; the
/// HICO-DET list format goes through the importer, which clamps boxes and
/// merges verbs per (subject, object) pair.
pub fn load_annotations(
    path: &Path,
    format: AnnotationFormat,
    split: Split,
    vocab: &Vocabulary,
) -> Result<(Dataset, IngestReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        AnnotationFormat::Canonical => {
            let file: CanonicalFile = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            if file.schema_version != SCHEMA_VERSION {
                return Err(Error::Format(format!(
                    "{}: unsupported schema_version {}",
                    path.display(),
                    file.schema_version
                )));
            }
            let mut report = IngestReport::default();
            let mut images = file.images;
            for img in &mut images {
                for p in &mut img.pairs {
                    p.human = p.human.clamp_to(img.width, img.height);
                    p.object = p.object.clamp_to(img.width, img.height);
                }
                if img.pairs.is_empty() {
                    report.empty_images.push(img.image_id.clone());
                }
            }
            Ok((Dataset::new(file.split, images, vocab.clone())?, report))
        }
        AnnotationFormat::HicoJson => {
            let (images, report) = hico::import(&text, vocab)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            Ok((Dataset::new(split, images, vocab.clone())?, report))
        }
    }
}

/// Number of ground-truth instances per HOI category.
pub fn category_counts(ds: &Dataset) -> Vec<usize> {
    let mut counts = vec![0usize; ds.vocab.num_categories()];
    for img in &ds.images {
        for (_, c) in img.triplets(&ds.vocab) {
            counts[c] += 1;
        }
    }
    counts
}

/// Categories with fewer than [`RARE_THRESHOLD`] training instances,
/// including categories that never occur.
pub fn derive_rare_categories(train: &Dataset) -> BTreeSet<HoiId> {
    category_counts(train)
        .iter()
        .enumerate()
        .filter(|(_, &n)| n < RARE_THRESHOLD)
        .map(|(c, _)| c)
        .collect()
}
