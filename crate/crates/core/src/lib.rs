//! Building blocks for training and evaluating a language model that
//! detects human-object interactions as structured text.
//!
//! - [`parser`] turns a completion into HOI instances without ever failing.
//! - [`reward`] scores a completion against ground truth.
//! - [`training`] holds the group-relative policy objective and SFT loss.
//! - [`eval`] computes HICO-DET style mAP.
//! - [`dataset`] loads annotations, builds prompts, and assembles SFT data.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hungarian;
pub mod parser;
pub mod reward;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};
pub use geometry::{iou, pair_similarity, BBox};
pub use parser::{parse_completion, HoiInstance, ParsedCompletion};
pub use reward::{score_sample, RewardBreakdown, RewardWeights};
pub use vocab::Vocabulary;
