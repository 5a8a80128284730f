//! Loop checkpoints: JSON documents with lossless float encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{MeshParams, SimilarityTransform};
use crate::oracle::generator::json_offset;
use crate::oracle::GeneratorParams;
use crate::splat::SplatCloud;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u64 = 1;

/// Stages of one loop round, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Frontal,
    Render,
    Invert,
    Synthesize,
    Align,
    Done,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Frontal => "frontal",
            Stage::Render => "render",
            Stage::Invert => "invert",
            Stage::Synthesize => "synthesize",
            Stage::Align => "align",
            Stage::Done => "done",
        }
    }
}

/// The next stage to run and the round it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub round: usize,
    pub next: Stage,
    /// Seed drawn for this round's random back cameras.
    pub round_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u64,
    pub cloud: SplatCloud,
    pub transform: SimilarityTransform,
    pub phi: MeshParams,
    pub phi_orig: MeshParams,
    pub generator: GeneratorParams,
    pub cursor: Cursor,
    pub rng: RngState,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", json_offset(text, &e), e.to_string()))?;
        if probe.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: probe.format_version,
                supported: CHECKPOINT_FORMAT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(|e| Error::parse("checkpoint", json_offset(text, &e), e.to_string()))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text)
}
