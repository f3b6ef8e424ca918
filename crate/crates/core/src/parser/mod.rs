//! Lenient parsing of model completions into HOI instance records.
//!
//! A completion is expected to look like
//!
//! ```text
//! <think> ...reasoning... </think>
//! <answer>[{"human": [x1, y1, x2, y2], "object": [...], "object class": "bicycle", "verb class": ["ride"]}]</answer>
//! ```
//!
//! Nothing here fails: malformed text produces fewer instances and a list of
//! diagnostics. Keys are counted including repeats because the key penalty
//! in the reward needs the raw count.

pub mod json;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use json::RawValue;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

pub const KEY_HUMAN: &str = "human";
pub const KEY_OBJECT: &str = "object";
pub const KEY_OBJECT_CLASS: &str = "object class";
pub const KEY_VERB_CLASS: &str = "verb class";

/// Number of keys in a well-formed instance record.
pub const CANONICAL_KEY_COUNT: usize = 4;

pub const DEFAULT_MAX_CHARS: usize = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalKey {
    Human,
    Object,
    ObjectClass,
    VerbClass,
}

impl CanonicalKey {
    /// Exact match after lowercasing and trimming.
    pub fn from_raw(key: &str) -> Option<Self> {
        match key.trim().to_lowercase().as_str() {
            KEY_HUMAN => Some(Self::Human),
            KEY_OBJECT => Some(Self::Object),
            KEY_OBJECT_CLASS => Some(Self::ObjectClass),
            KEY_VERB_CLASS => Some(Self::VerbClass),
            _ => None,
        }
    }
}

/// One predicted human-object record as written by the model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HoiInstance {
    pub human: Option<BBox>,
    pub object: Option<BBox>,
    pub object_class: Option<String>,
    pub verb_classes: Vec<String>,
    /// Every key in the record, repeats and unknown keys included.
    pub key_count: usize,
    pub present_keys: BTreeSet<CanonicalKey>,
}

impl HoiInstance {
    pub fn has_key(&self, key: CanonicalKey) -> bool {
        self.present_keys.contains(&key)
    }

    pub fn boxes(&self) -> Option<(BBox, BBox)> {
        Some((self.human?, self.object?))
    }

    /// Build from the ordered members of a JSON object. The first occurrence
    /// of a repeated key supplies the value.
    pub fn from_members(members: &[(String, RawValue)]) -> Self {
        let mut inst = HoiInstance {
            key_count: members.len(),
            ..Default::default()
        };
        for (key, value) in members {
            let Some(canon) = CanonicalKey::from_raw(key) else {
                continue;
            };
            if !inst.present_keys.insert(canon) {
                continue;
            }
            match canon {
                CanonicalKey::Human => inst.human = box_value(value),
                CanonicalKey::Object => inst.object = box_value(value),
                CanonicalKey::ObjectClass => {
                    if let RawValue::String(s) = value {
                        inst.object_class = Some(s.clone());
                    }
                }
                CanonicalKey::VerbClass => inst.verb_classes = verb_values(value),
            }
        }
        inst
    }
}

fn box_value(v: &RawValue) -> Option<BBox> {
    let RawValue::Array(items) = v else {
        return None;
    };
    if items.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (slot, item) in out.iter_mut().zip(items) {
        match item {
            RawValue::Number(n) if n.is_finite() => *slot = *n,
            _ => return None,
        }
    }
    Some(BBox::from_array(out))
}

/// A single string becomes a one-element list. Non-string list items are
/// kept as their literal text so they still count as (invalid) predictions.
fn verb_values(v: &RawValue) -> Vec<String> {
    match v {
        RawValue::String(s) => vec![s.clone()],
        RawValue::Array(items) => items
            .iter()
            .map(|item| match item {
                RawValue::String(s) => s.clone(),
                other => render_scalar(other),
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn render_scalar(v: &RawValue) -> String {
    match v {
        RawValue::Null => "null".into(),
        RawValue::Bool(b) => b.to_string(),
        RawValue::Number(n) => n.to_string(),
        RawValue::String(s) => s.clone(),
        RawValue::Array(_) => "[...]".into(),
        RawValue::Object(_) => "{...}".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParsedCompletion {
    pub has_think_tag: bool,
    pub has_answer_tag: bool,
    pub think_text: Option<String>,
    pub instances: Vec<HoiInstance>,
    pub parse_diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Completions longer than this many characters are truncated first.
    pub max_chars: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            max_chars: DEFAULT_MAX_CHARS,
        }
    }
}

fn tag_content<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let rest = &text[start..];
    Some(match rest.find(close) {
        Some(end) => &rest[..end],
        None => rest,
    })
}

/// Contents of the first think and answer blocks. An unclosed block runs to
/// the end of the text.
pub fn extract_tags(text: &str) -> (Option<&str>, Option<&str>) {
    (
        tag_content(text, THINK_OPEN, THINK_CLOSE),
        tag_content(text, ANSWER_OPEN, ANSWER_CLOSE),
    )
}

fn strip_code_fence(s: &str) -> &str {
    let t = s.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn instances_from_array(
    items: &[RawValue],
    diags: &mut Vec<Diagnostic>,
    at: usize,
) -> Vec<HoiInstance> {
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        match item {
            RawValue::Object(members) => out.push(HoiInstance::from_members(members)),
            _ => diags.push(Diagnostic {
                position: at,
                message: format!("array element {i} is not an object; skipped"),
            }),
        }
    }
    out
}

fn is_object_array(v: &RawValue) -> bool {
    matches!(v, RawValue::Array(items) if items.iter().all(|x| matches!(x, RawValue::Object(_))))
}

/// Parse the contents of an answer block into instance records.
///
/// Tries, in order: the whole text as one JSON value; the first array of
/// objects found anywhere in the text (anything after it is ignored); a scan
/// that keeps every well-formed top-level object and skips the rest.
pub fn parse_answer(answer_text: &str) -> (Vec<HoiInstance>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let body = strip_code_fence(answer_text);
    let offset = body.as_ptr() as usize - answer_text.as_ptr() as usize;

    match json::parse_complete(body) {
        Ok(RawValue::Array(items)) => {
            let inst = instances_from_array(&items, &mut diags, offset);
            return (inst, diags);
        }
        Ok(RawValue::Object(members)) => {
            diags.push(Diagnostic {
                position: offset,
                message: "answer is a bare object, not an array".into(),
            });
            return (vec![HoiInstance::from_members(&members)], diags);
        }
        Ok(_) => {
            diags.push(Diagnostic {
                position: offset,
                message: "answer is not an array".into(),
            });
            return (Vec::new(), diags);
        }
        Err(e) => diags.push(Diagnostic {
            position: offset + e.position,
            message: format!("strict parse failed: {}", e.message),
        }),
    }

    let bytes = body.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b != b'[' {
            continue;
        }
        let next = bytes[i + 1..].iter().find(|c| !c.is_ascii_whitespace());
        if !matches!(next, Some(b'{') | Some(b']')) {
            continue;
        }
        if let Ok((v, _)) = json::parse_value_at(body, i) {
            if is_object_array(&v) {
                let RawValue::Array(items) = v else {
                    unreachable!()
                };
                diags.push(Diagnostic {
                    position: offset + i,
                    message: "recovered answer array from surrounding text".into(),
                });
                return (instances_from_array(&items, &mut diags, offset + i), diags);
            }
        }
    }

    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        match json::parse_value_at(body, i) {
            Ok((RawValue::Object(members), end)) => {
                out.push(HoiInstance::from_members(&members));
                i = end;
            }
            Ok((_, end)) => i = end,
            Err(e) => {
                diags.push(Diagnostic {
                    position: offset + e.position,
                    message: format!("skipped malformed entry: {}", e.message),
                });
                i += 1;
            }
        }
    }
    if out.is_empty() {
        diags.push(Diagnostic {
            position: offset,
            message: "no instance records recovered".into(),
        });
    }
    (out, diags)
}

fn truncate_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

pub fn parse_completion(text: &str) -> ParsedCompletion {
    parse_completion_with(text, &ParseOptions::default())
}

pub fn parse_completion_with(text: &str, opts: &ParseOptions) -> ParsedCompletion {
    let text = truncate_chars(text, opts.max_chars);
    let (think, answer) = extract_tags(text);
    let mut parsed = ParsedCompletion {
        has_think_tag: think.is_some(),
        has_answer_tag: answer.is_some(),
        think_text: think.map(str::to_owned),
        ..Default::default()
    };
    if let Some(answer) = answer {
        let (instances, diags) = parse_answer(answer);
        parsed.instances = instances;
        parsed.parse_diagnostics = diags;
    }
    parsed
}
