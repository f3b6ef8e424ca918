//! Distillation records: prompt + teacher reasoning + canonical answer.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{gt_to_answer, wrap_completion, Dataset};
use crate::error::{Error, Result};
use crate::parser::{THINK_CLOSE, THINK_OPEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub image_id: String,
    pub think: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftRecord {
    pub image_id: String,
    pub prompt: String,
    pub think: String,
    pub answer: String,
}

impl SftRecord {
    /// The supervised target: reasoning then answer, each in its tags.
    pub fn target_text(&self) -> String {
        wrap_completion(&self.think, &self.answer)
    }
}

/// Teachers sometimes wrap their reasoning in think tags themselves.
pub fn clean_trace(text: &str) -> String {
    let t = text.trim();
    let t = t.strip_prefix(THINK_OPEN).unwrap_or(t);
    let t = t.strip_suffix(THINK_CLOSE).unwrap_or(t);
    t.trim().to_string()
}

/// Read a trace file. Later lines for the same image override earlier ones.
/// Lines that are blank or carry a `_meta` header are skipped.
pub fn read_traces(path: &Path) -> Result<HashMap<String, String>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || is_meta_line(&line) {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.insert(rec.image_id, rec.think);
    }
    Ok(out)
}

/// JSON-lines header written by the command-line tool.
pub fn is_meta_line(line: &str) -> bool {
    line.trim_start().starts_with("{\"_meta\"")
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssembleSummary {
    pub written: usize,
    pub skipped: usize,
}

/// One record per image that has a trace, in dataset order.
pub fn assemble_sft(
    ds: &Dataset,
    traces: &HashMap<String, String>,
    prompt: &str,
) -> (Vec<SftRecord>, AssembleSummary) {
    let mut summary = AssembleSummary::default();
    let mut records = Vec::new();
    for img in &ds.images {
        match traces.get(&img.image_id) {
            Some(think) => {
                records.push(SftRecord {
                    image_id: img.image_id.clone(),
                    prompt: prompt.to_string(),
                    think: clean_trace(think),
                    answer: gt_to_answer(img, &ds.vocab),
                });
                summary.written += 1;
            }
            None => summary.skipped += 1,
        }
    }
    (records, summary)
}
