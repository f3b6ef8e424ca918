//! Canonical serialization of ground truth into the answer format.

use std::fmt::Write as _;

use super::{GtImage, GtPair};
use crate::parser::{HoiInstance, ANSWER_CLOSE, ANSWER_OPEN, THINK_CLOSE, THINK_OPEN};
use crate::vocab::{display_label, Vocabulary};

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn box_text(b: [i64; 4]) -> String {
    format!("[{}, {}, {}, {}]", b[0], b[1], b[2], b[3])
}

/// One JSON entry per pair, in annotation order, with integer boxes and all
/// verbs of the pair merged into one list.
pub fn gt_to_answer(g: &GtImage, vocab: &Vocabulary) -> String {
    let mut out = String::from("[");
    for (i, p) in g.pairs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let verbs: Vec<String> = p
            .verb_classes
            .iter()
            .map(|&v| json_str(&display_label(vocab.verb_name(v))))
            .collect();
        write!(
            out,
            "{{\"human\": {}, \"object\": {}, \"object class\": {}, \"verb class\": [{}]}}",
            box_text(p.human.rounded()),
            box_text(p.object.rounded()),
            json_str(&display_label(vocab.object_name(p.object_class))),
            verbs.join(", ")
        )
        .expect("writing to a String cannot fail");
    }
    out.push(']');
    out
}

/// `<think>..</think>\n<answer>..</answer>`
pub fn wrap_completion(think: &str, answer: &str) -> String {
    format!("{THINK_OPEN}{think}{THINK_CLOSE}\n{ANSWER_OPEN}{answer}{ANSWER_CLOSE}")
}

/// Resolve a parsed instance back into a ground-truth pair, if every field
/// is present and in vocabulary.
pub fn instance_to_pair(inst: &HoiInstance, vocab: &Vocabulary) -> Option<GtPair> {
    let (human, object) = inst.boxes()?;
    let object_class = vocab.resolve_object(inst.object_class.as_deref()?)?;
    let verb_classes = inst
        .verb_classes
        .iter()
        .map(|v| vocab.resolve_verb(v))
        .collect::<Option<_>>()?;
    Some(GtPair {
        human,
        object,
        object_class,
        verb_classes,
    })
}
