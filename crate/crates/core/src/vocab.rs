//! Object/verb vocabularies and the table of valid verb-object combinations.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ObjectId = usize;
pub type VerbId = usize;
pub type HoiId = usize;

const BUNDLED_HICO: &str = include_str!("../data/hico_vocab.json");
const BUNDLED_RARE: &str = include_str!("../data/hico_rare_reference.json");

pub const HICO_OBJECTS: usize = 80;
pub const HICO_VERBS: usize = 117;
pub const HICO_CATEGORIES: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Object,
    Verb,
}

/// On-disk shape of a vocabulary file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VocabularyFile {
    pub objects: Vec<String>,
    pub verbs: Vec<String>,
    pub hoi_triples: Vec<[usize; 2]>,
}

/// Label vocabularies plus the list of valid `(verb, object)` combinations.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    objects: Vec<String>,
    verbs: Vec<String>,
    hoi_triples: Vec<(VerbId, ObjectId)>,
    object_index: HashMap<String, ObjectId>,
    verb_index: HashMap<String, VerbId>,
    hoi_index: HashMap<(VerbId, ObjectId), HoiId>,
    warnings: Vec<String>,
}

/// Lowercase, trim, and fold runs of whitespace or underscores into a single `_`.
pub fn normalize_label(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

/// Display form used in prompts and serialized answers: underscores become spaces.
pub fn display_label(name: &str) -> String {
    name.replace('_', " ")
}

impl Vocabulary {
    /// The bundled HICO-DET vocabulary (80 objects, 117 verbs, 600 categories).
    pub fn hico_det() -> Self {
        let file: VocabularyFile =
            serde_json::from_str(BUNDLED_HICO).expect("bundled vocabulary is valid JSON");
        Self::from_file_contents(file).expect("bundled vocabulary is consistent")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: VocabularyFile = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let vocab = Self::from_file_contents(file)?;
        for w in vocab.warnings() {
            log::warn!("{}: {w}", path.display());
        }
        Ok(vocab)
    }

    /// Validates indices and duplicates (hard errors); count mismatches against
    /// the HICO-DET sizes are recorded as warnings.
    pub fn from_file_contents(file: VocabularyFile) -> Result<Self> {
        let mut object_index = HashMap::new();
        for (i, name) in file.objects.iter().enumerate() {
            if object_index.insert(normalize_label(name), i).is_some() {
                return Err(Error::Vocabulary(format!("duplicate object name {name:?}")));
            }
        }
        let mut verb_index = HashMap::new();
        for (i, name) in file.verbs.iter().enumerate() {
            if verb_index.insert(normalize_label(name), i).is_some() {
                return Err(Error::Vocabulary(format!("duplicate verb name {name:?}")));
            }
        }
        let mut hoi_index = HashMap::new();
        let mut hoi_triples = Vec::with_capacity(file.hoi_triples.len());
        for (i, &[v, o]) in file.hoi_triples.iter().enumerate() {
            if v >= file.verbs.len() || o >= file.objects.len() {
                return Err(Error::Vocabulary(format!(
                    "hoi_triples[{i}] = [{v}, {o}] indexes outside the vocabulary"
                )));
            }
            if hoi_index.insert((v, o), i).is_some() {
                return Err(Error::Vocabulary(format!(
                    "hoi_triples[{i}] = [{v}, {o}] is a duplicate"
                )));
            }
            hoi_triples.push((v, o));
        }

        let mut warnings = Vec::new();
        for (what, got, want) in [
            ("objects", file.objects.len(), HICO_OBJECTS),
            ("verbs", file.verbs.len(), HICO_VERBS),
            ("hoi_triples", hoi_triples.len(), HICO_CATEGORIES),
        ] {
            if got != want {
                warnings.push(format!("{what} has {got} entries, HICO-DET has {want}"));
            }
        }

        Ok(Self {
            objects: file.objects,
            verbs: file.verbs,
            hoi_triples,
            object_index,
            verb_index,
            hoi_index,
            warnings,
        })
    }

    pub fn to_file_contents(&self) -> VocabularyFile {
        VocabularyFile {
            objects: self.objects.clone(),
            verbs: self.verbs.clone(),
            hoi_triples: self.hoi_triples.iter().map(|&(v, o)| [v, o]).collect(),
        }
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn hoi_triples(&self) -> &[(VerbId, ObjectId)] {
        &self.hoi_triples
    }

    pub fn num_categories(&self) -> usize {
        self.hoi_triples.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        &self.objects[id]
    }

    pub fn verb_name(&self, id: VerbId) -> &str {
        &self.verbs[id]
    }

    pub fn resolve(&self, name: &str, kind: LabelKind) -> Option<usize> {
        let key = normalize_label(name);
        match kind {
            LabelKind::Object => self.object_index.get(&key).copied(),
            LabelKind::Verb => self.verb_index.get(&key).copied(),
        }
    }

    pub fn resolve_object(&self, name: &str) -> Option<ObjectId> {
        self.resolve(name, LabelKind::Object)
    }

    pub fn resolve_verb(&self, name: &str) -> Option<VerbId> {
        self.resolve(name, LabelKind::Verb)
    }

    /// Category id of a `(verb, object)` combination, if it is one of the valid triples.
    pub fn hoi_category(&self, verb: VerbId, object: ObjectId) -> Option<HoiId> {
        self.hoi_index.get(&(verb, object)).copied()
    }

    pub fn category_object(&self, hoi: HoiId) -> ObjectId {
        self.hoi_triples[hoi].1
    }
}

/// Published HICO-DET rare category ids (fewer than 10 training instances),
/// indexed against the bundled vocabulary.
pub fn hico_reference_rare_set() -> Vec<HoiId> {
    serde_json::from_str(BUNDLED_RARE).expect("bundled rare list is valid JSON")
}
