//! Question template: task instruction with the full label space, reasoning
//! guidance, and an output format example.

use serde::{Deserialize, Serialize};

use crate::parser::{ANSWER_CLOSE, ANSWER_OPEN, THINK_CLOSE, THINK_OPEN};
use crate::vocab::{display_label, Vocabulary};

pub const OBJECTS_OPEN: &str = "<VALID OBJECT CLASSES>";
pub const OBJECTS_CLOSE: &str = "</VALID OBJECT CLASSES>";
pub const INTERACTIONS_OPEN: &str = "<VALID INTERACTIONS>";
pub const INTERACTIONS_CLOSE: &str = "</VALID INTERACTIONS>";

/// Template wording. Everything except the label lists is configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemplateConfig {
    pub role_line: String,
    pub task_line: String,
    pub objects_line: String,
    pub interactions_line: String,
    pub reasoning_guidance: String,
    pub format_line: String,
    pub example_think: String,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            role_line: "You are an HOI detection model.".into(),
            task_line: "Detect every human-object interaction in the image. Report each human-object pair with \
                        the human bounding box, the object bounding box, the object class, and all verb classes \
                        that describe the interaction. Boxes are [x1, y1, x2, y2] in absolute pixel coordinates."
                .into(),
            objects_line: "The object class must be one of:".into(),
            interactions_line: "Each verb class must form one of these verb-object combinations:".into(),
            reasoning_guidance: "Thinking Process:\n\
                                 1. Identify every human in the scene and locate each one with a bounding box.\n\
                                 2. Analyze the actions and poses of each human.\n\
                                 3. Determine which surrounding objects each human interacts with, locate those \
                                 objects, and choose the matching verb classes from the valid interactions."
                .into(),
            format_line: "Write your reasoning inside the think tags and the final list of HOI instances as JSON \
                          inside the answer tags, following this example:"
                .into(),
            example_think: "There is one person riding a bicycle and holding its handlebars.".into(),
        }
    }
}

/// Interaction lines `"verb object"`, grouped by object in vocabulary order.
pub fn interaction_lines(vocab: &Vocabulary) -> Vec<String> {
    let mut lines = Vec::with_capacity(vocab.num_categories());
    for obj in 0..vocab.objects().len() {
        for &(v, o) in vocab.hoi_triples() {
            if o == obj {
                lines.push(format!(
                    "{} {}",
                    display_label(vocab.verb_name(v)),
                    display_label(vocab.object_name(o))
                ));
            }
        }
    }
    lines
}

pub fn format_example(cfg: &TemplateConfig) -> String {
    format!(
        "{THINK_OPEN}{}{THINK_CLOSE}\n{ANSWER_OPEN}[{{\"human\": [120, 45, 310, 470], \"object\": [90, 260, 380, 520], \
         \"object class\": \"bicycle\", \"verb class\": [\"ride\", \"hold\"]}}]{ANSWER_CLOSE}",
        cfg.example_think
    )
}

/// Render the full prompt. Output depends only on `vocab` and `cfg`.
pub fn build_prompt(vocab: &Vocabulary, cfg: &TemplateConfig) -> String {
    let objects: Vec<String> = vocab.objects().iter().map(|o| display_label(o)).collect();
    let mut out = String::new();
    out.push_str(&cfg.role_line);
    out.push('\n');
    out.push_str(&cfg.task_line);
    out.push_str("\n\n");
    out.push_str(&cfg.objects_line);
    out.push('\n');
    out.push_str(OBJECTS_OPEN);
    out.push('\n');
    out.push_str(&objects.join(", "));
    out.push('\n');
    out.push_str(OBJECTS_CLOSE);
    out.push_str("\n\n");
    out.push_str(&cfg.interactions_line);
    out.push('\n');
    out.push_str(INTERACTIONS_OPEN);
    out.push('\n');
    for line in interaction_lines(vocab) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(INTERACTIONS_CLOSE);
    out.push_str("\n\n");
    out.push_str(&cfg.reasoning_guidance);
    out.push_str("\n\n");
    out.push_str(&cfg.format_line);
    out.push('\n');
    out.push_str(&format_example(cfg));
    out.push('\n');
    out
}

/// Text between an opening and closing section marker.
pub fn section<'a>(prompt: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = prompt.find(open)? + open.len();
    let end = start + prompt[start..].find(close)?;
    Some(prompt[start..end].trim())
}
