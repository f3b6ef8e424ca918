//! Importer for the widely distributed HICO-DET list format: one record per
//! image with `file_name`, an `annotations` array of `{bbox, category_id}`
//! (COCO object ids) and an `hoi_annotation` array of
//! `{subject_id, object_id, category_id}` (1-based verb ids).

use std::collections::{BTreeSet, HashMap};

use serde::Deserialize;

use super::{GtImage, GtPair, IngestReport};
use crate::geometry::BBox;
use crate::vocab::Vocabulary;

/// COCO category id for each of the 80 object classes, in vocabulary order.
pub const COCO_OBJECT_IDS: [u32; 80] = [
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 27, 28,
    31, 32, 33, 34, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44, 46, 47, 48, 49, 50, 51, 52, 53, 54, 55,
    56, 57, 58, 59, 60, 61, 62, 63, 64, 65, 67, 70, 72, 73, 74, 75, 76, 77, 78, 79, 80, 81, 82, 84,
    85, 86, 87, 88, 89, 90,
];

#[derive(Debug, Deserialize)]
struct RawImage {
    file_name: String,
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    #[serde(default)]
    annotations: Vec<RawBox>,
    #[serde(default)]
    hoi_annotation: Vec<RawHoi>,
}

#[derive(Debug, Deserialize)]
struct RawBox {
    bbox: Vec<f64>,
    category_id: u32,
}

#[derive(Debug, Deserialize)]
struct RawHoi {
    subject_id: i64,
    object_id: i64,
    category_id: i64,
}

/// Parse the list format. The outer JSON must be well formed; problems in
/// individual records are collected in the report.
///
/// Images without `width`/`height` are bounded by the furthest box corner.
pub fn import(text: &str, vocab: &Vocabulary) -> Result<(Vec<GtImage>, IngestReport), String> {
    let raw: Vec<serde_json::Value> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let coco_to_obj: HashMap<u32, usize> = COCO_OBJECT_IDS
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();

    let mut report = IngestReport::default();
    let mut images = Vec::with_capacity(raw.len());
    for (idx, value) in raw.into_iter().enumerate() {
        let rec: RawImage = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => {
                report
                    .malformed
                    .push((idx, format!("unreadable record: {e}")));
                continue;
            }
        };
        let img = convert(idx, rec, vocab, &coco_to_obj, &mut report);
        if img.pairs.is_empty() {
            report.empty_images.push(img.image_id.clone());
        }
        images.push(img);
    }
    Ok((images, report))
}

fn convert(
    idx: usize,
    rec: RawImage,
    vocab: &Vocabulary,
    coco_to_obj: &HashMap<u32, usize>,
    report: &mut IngestReport,
) -> GtImage {
    let boxes: Vec<Option<(BBox, Option<usize>)>> = rec
        .annotations
        .iter()
        .enumerate()
        .map(|(k, a)| {
            if a.bbox.len() != 4 || a.bbox.iter().any(|v| !v.is_finite()) {
                report.malformed.push((
                    idx,
                    format!("{}: annotation {k} has an invalid bbox", rec.file_name),
                ));
                return None;
            }
            Some((
                BBox::new(a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]),
                coco_to_obj.get(&a.category_id).copied(),
            ))
        })
        .collect();

    let extent = |pick: fn(&BBox) -> f64| {
        boxes
            .iter()
            .flatten()
            .map(|(b, _)| pick(b))
            .fold(0.0f64, f64::max)
            .ceil()
    };
    let width = rec.width.unwrap_or_else(|| extent(|b| b.x2));
    let height = rec.height.unwrap_or_else(|| extent(|b| b.y2));

    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut verbs: HashMap<(usize, usize), BTreeSet<usize>> = HashMap::new();
    for (k, h) in rec.hoi_annotation.iter().enumerate() {
        let (Ok(s), Ok(o)) = (usize::try_from(h.subject_id), usize::try_from(h.object_id)) else {
            report.malformed.push((
                idx,
                format!("{}: hoi {k} has a negative index", rec.file_name),
            ));
            continue;
        };
        let (Some(Some(_)), Some(Some((_, obj_class)))) = (boxes.get(s), boxes.get(o)) else {
            report.malformed.push((
                idx,
                format!("{}: hoi {k} references a missing box", rec.file_name),
            ));
            continue;
        };
        let Some(obj) = *obj_class else {
            report.malformed.push((
                idx,
                format!("{}: hoi {k} object has an unknown category", rec.file_name),
            ));
            continue;
        };
        let verb = match usize::try_from(h.category_id) {
            Ok(v) if (1..=vocab.verbs().len()).contains(&v) => v - 1,
            _ => {
                report.malformed.push((
                    idx,
                    format!(
                        "{}: hoi {k} has verb id {} out of range",
                        rec.file_name, h.category_id
                    ),
                ));
                continue;
            }
        };
        if vocab.hoi_category(verb, obj).is_none() {
            report.malformed.push((
                idx,
                format!(
                    "{}: hoi {k} ({}, {}) is not a valid interaction",
                    rec.file_name,
                    vocab.verb_name(verb),
                    vocab.object_name(obj)
                ),
            ));
            continue;
        }
        let entry = verbs.entry((s, o)).or_default();
        if entry.is_empty() {
            order.push((s, o));
        }
        entry.insert(verb);
    }

    let pairs = order
        .into_iter()
        .map(|(s, o)| {
            let (human, _) = boxes[s].expect("checked above");
            let (object, obj) = boxes[o].expect("checked above");
            GtPair {
                human: human.clamp_to(width, height),
                object: object.clamp_to(width, height),
                object_class: obj.expect("checked above"),
                verb_classes: verbs.remove(&(s, o)).unwrap_or_default(),
            }
        })
        .collect();

    GtImage {
        image_id: rec.file_name,
        width,
        height,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_verbs_and_clamps() {
        let v = Vocabulary::hico_det();
        let text = r#"[
          {"file_name": "a.jpg", "width": 100, "height": 80,
           "annotations": [{"bbox": [-5, 0, 50, 90], "category_id": 1}, {"bbox": [40, 10, 120, 70], "category_id": 2}],
           "hoi_annotation": [
             {"subject_id": 0, "object_id": 1, "category_id": 77},
             {"subject_id": 0, "object_id": 1, "category_id": 37},
             {"subject_id": 0, "object_id": 1, "category_id": 77}
           ]},
          {"file_name": "b.jpg", "annotations": [], "hoi_annotation": []},
          {"file_name": "c.jpg",
           "annotations": [{"bbox": [0, 0, 10, 10], "category_id": 1}, {"bbox": [5, 5, 30, 40], "category_id": 2}],
           "hoi_annotation": [{"subject_id": 0, "object_id": 7, "category_id": 77}, {"subject_id": 0, "object_id": 1, "category_id": 24}]},
          {"nope": 1}
        ]"#;
        let (images, report) = import(text, &v).unwrap();
        assert_eq!(images.len(), 3);
        let a = &images[0];
        assert_eq!(a.pairs.len(), 1);
        let names: Vec<&str> = a.pairs[0]
            .verb_classes
            .iter()
            .map(|&i| v.verb_name(i))
            .collect();
        assert_eq!(names, vec!["hold", "ride"]);
        assert_eq!(a.pairs[0].human.to_array(), [0., 0., 50., 80.]);
        assert_eq!(a.pairs[0].object.to_array(), [40., 10., 100., 70.]);
        assert_eq!(v.object_name(a.pairs[0].object_class), "bicycle");

        // c.jpg: missing box index and (eat, bicycle) are both rejected.
        assert!(images[2].pairs.is_empty());
        assert_eq!(images[2].width, 30.0);
        assert_eq!(
            report.empty_images,
            vec!["b.jpg".to_string(), "c.jpg".to_string()]
        );
        assert_eq!(report.malformed.len(), 3);
        assert_eq!(report.malformed[2].0, 3);
    }
}
