//! Client for collecting teacher reasoning traces from a chat-completions
//! compatible HTTP endpoint.
//!
//! Runs are resumable: ids already present in the output file are skipped.
//! Each image is retried with exponential backoff up to `max_retries` extra
//! attempts; ids that never succeed are written to a `.failed` sidecar.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::TemplateConfig;
use super::sft::{clean_trace, read_traces, TraceRecord};
use super::Dataset;
use crate::error::{Error, Result};

pub const DEFAULT_TOKEN_ENV: &str = "HOID_TRACE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Full URL of the chat-completions route.
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    /// Instruction sent alongside each image.
    pub prompt: String,
    /// Prefix joined with the image id to form the image reference.
    pub image_root: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub concurrency: usize,
    /// Minimum spacing between request starts.
    pub min_interval_ms: u64,
    pub timeout_secs: u64,
    pub max_tokens: Option<u32>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            token_env: DEFAULT_TOKEN_ENV.into(),
            prompt: TemplateConfig::default().reasoning_guidance,
            image_root: String::new(),
            max_retries: 4,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            concurrency: 4,
            min_interval_ms: 0,
            timeout_secs: 120,
            max_tokens: None,
        }
    }
}

impl EndpointConfig {
    pub fn image_ref(&self, image_id: &str) -> String {
        if self.image_root.is_empty() {
            image_id.to_string()
        } else {
            format!("{}/{}", self.image_root.trim_end_matches('/'), image_id)
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttemptLog {
    pub image_id: String,
    /// 1-based.
    pub attempt: u32,
    /// HTTP status or transport error description.
    pub outcome: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FetchReport {
    pub fetched: usize,
    pub skipped_existing: usize,
    pub failed: Vec<String>,
    pub attempts: Vec<AttemptLog>,
}

pub fn failed_sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".failed");
    PathBuf::from(s)
}

struct Client {
    agent: ureq::Agent,
    token: Option<String>,
    next_slot: Mutex<Instant>,
}

impl Client {
    fn new(cfg: &EndpointConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        if token.is_none() {
            log::warn!(
                "{} is not set; sending requests without authorization",
                cfg.token_env
            );
        }
        Self {
            agent,
            token,
            next_slot: Mutex::new(Instant::now()),
        }
    }

    fn wait_for_slot(&self, interval: Duration) {
        if interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + interval;
            start - now
        };
        std::thread::sleep(wait);
    }

    fn request(&self, cfg: &EndpointConfig, image_id: &str) -> std::result::Result<String, String> {
        let mut body = json!({
            "model": cfg.model,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": cfg.prompt},
                    {"type": "image_url", "image_url": {"url": cfg.image_ref(image_id)}}
                ]
            }]
        });
        if let Some(m) = cfg.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let mut req = self
            .agent
            .post(&cfg.url)
            .header("Content-Type", "application/json");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| format!("transport: {e}"))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(format!("http {status}"));
        }
        let v: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("http {status}: unreadable body: {e}"))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| format!("http {status}: response has no message content"))
    }

    fn fetch_one(
        &self,
        cfg: &EndpointConfig,
        image_id: &str,
        log: &mut Vec<AttemptLog>,
    ) -> Option<String> {
        let interval = Duration::from_millis(cfg.min_interval_ms);
        for attempt in 0..=cfg.max_retries {
            self.wait_for_slot(interval);
            let result = self.request(cfg, image_id);
            log.push(AttemptLog {
                image_id: image_id.to_string(),
                attempt: attempt + 1,
                outcome: match &result {
                    Ok(_) => "http 200".into(),
                    Err(e) => e.clone(),
                },
            });
            match result {
                Ok(text) => return Some(text),
                Err(e) => {
                    log::warn!("{image_id}: attempt {} failed: {e}", attempt + 1);
                    if attempt < cfg.max_retries {
                        std::thread::sleep(cfg.backoff(attempt));
                    }
                }
            }
        }
        None
    }
}

/// Fetch traces for every image not yet in `out`, appending JSON lines
/// `{image_id, think}` in image-id order.
pub fn fetch_traces(ds: &Dataset, cfg: &EndpointConfig, out: &Path) -> Result<FetchReport> {
    let done: HashSet<String> = if out.exists() {
        read_traces(out)?.into_keys().collect()
    } else {
        HashSet::new()
    };
    let mut todo: Vec<&str> = ds
        .images
        .iter()
        .map(|i| i.image_id.as_str())
        .filter(|id| !done.contains(*id))
        .collect();
    todo.sort_unstable();

    let mut report = FetchReport {
        skipped_existing: ds.len() - todo.len(),
        ..Default::default()
    };
    let client = Client::new(cfg);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| Error::io(out, e))?;

    for chunk in todo.chunks(cfg.concurrency.max(1)) {
        let results: Vec<(Option<String>, Vec<AttemptLog>)> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|id| {
                    let client = &client;
                    s.spawn(move || {
                        let mut log = Vec::new();
                        let text = client.fetch_one(cfg, id, &mut log);
                        (text, log)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| (None, Vec::new())))
                .collect()
        });
        for (id, (text, log)) in chunk.iter().zip(results) {
            report.attempts.extend(log);
            match text {
                Some(t) => {
                    let rec = TraceRecord {
                        image_id: id.to_string(),
                        think: clean_trace(&t),
                    };
                    let line =
                        serde_json::to_string(&rec).map_err(|e| Error::Format(e.to_string()))?;
                    writeln!(file, "{line}").map_err(|e| Error::io(out, e))?;
                    report.fetched += 1;
                }
                None => report.failed.push(id.to_string()),
            }
        }
        file.flush().map_err(|e| Error::io(out, e))?;
    }

    let sidecar = failed_sidecar_path(out);
    if report.failed.is_empty() {
        if sidecar.exists() {
            std::fs::remove_file(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        }
    } else {
        let mut text = report.failed.join("\n");
        text.push('\n');
        std::fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    }
    Ok(report)
}
