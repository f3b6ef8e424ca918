#![allow(dead_code)]

use std::path::PathBuf;

use hoid_core::dataset::{load_annotations, AnnotationFormat, Dataset, Split};
use hoid_core::Vocabulary;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn load(name: &str) -> Dataset {
    let (ds, _) = load_annotations(
        &fixture(name),
        AnnotationFormat::Canonical,
        Split::Test,
        &Vocabulary::hico_det(),
    )
    .unwrap_or_else(|e| panic!("{name}: {e}"));
    ds
}

pub fn mini_test() -> Dataset {
    load("mini_test.json")
}
