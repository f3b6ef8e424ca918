//! Layered configuration: built-in defaults, then a TOML or JSON file, then
//! command-line overrides.

use std::path::{Path, PathBuf};

use hoid_core::dataset::prompt::TemplateConfig;
use hoid_core::dataset::simulate::NoiseProfile;
use hoid_core::dataset::traces::EndpointConfig;
use hoid_core::eval::ScoreMode;
use hoid_core::reward::RewardWeights;
use hoid_core::training::GrpoParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub score_mode: ScoreMode,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reward: RewardWeights,
    pub grpo: GrpoParams,
    pub eval: EvalConfig,
    pub noise: NoiseProfile,
    pub template: TemplateConfig,
    pub endpoint: EndpointConfig,
    pub paths: Paths,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg: Config = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        };
        Ok(cfg)
    }
}

/// Apply `key=value` overrides such as `w_tag=0.3,dedup_iou_threshold=0.6`.
pub fn apply_weight_overrides(w: &mut RewardWeights, spec: &str) -> Result<(), CliError> {
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            CliError::Invalid(format!("weight override {item:?} is not key=value"))
        })?;
        let k = k.trim();
        let v = v.trim();
        if k == "dedup_mode" {
            w.dedup_mode = v.parse().map_err(CliError::Invalid)?;
            continue;
        }
        let x: f64 = v
            .parse()
            .map_err(|_| CliError::Invalid(format!("weight {k}: {v:?} is not a number")))?;
        match k {
            "w_tag" => w.w_tag = x,
            "w_b" => w.w_b = x,
            "w_ko" => w.w_ko = x,
            "w_kv" => w.w_kv = x,
            "dedup_iou_threshold" => w.dedup_iou_threshold = x,
            other => return Err(CliError::Invalid(format!("unknown weight {other:?}"))),
        }
    }
    w.validate().map_err(CliError::Invalid)
}
