use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SequenceSelection;
use crate::error::{Error, Result};
use crate::store::{write_sequence, FrameEmbedding, FrameSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSelectionRecord {
    pub frame: usize,
    pub selected_count: usize,
    pub indices: Vec<usize>,
}

/// JSON record of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub video_id: String,
    pub k_ratio: f64,
    pub num_patches: usize,
    pub mean_selected: f64,
    pub compression_ratio: f64,
    pub frames: Vec<FrameSelectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl SelectionFile {
    pub fn from_selection(video_id: &str, sel: &SequenceSelection) -> Self {
        let frames = sel
            .frames
            .iter()
            .enumerate()
            .map(|(frame, f)| FrameSelectionRecord {
                frame,
                selected_count: f.mask.selected_count,
                indices: f.tokens.indices(),
            })
            .collect();
        Self {
            video_id: video_id.to_string(),
            k_ratio: sel.k_ratio,
            num_patches: sel.stats.num_patches,
            mean_selected: sel.stats.mean_selected,
            compression_ratio: sel.stats.compression_ratio,
            frames,
            config: None,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("selection", e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// Writes the selected token values as a VAEB file whose patch grid is the kept tokens.
///
/// Each frame keeps its class embedding; the `N` field of the header is the per-frame
/// budget, so the file is readable with [`crate::store::read_sequence`].
pub fn write_token_sidecar(
    seq: &FrameSequence,
    sel: &SequenceSelection,
    path: impl AsRef<Path>,
) -> Result<()> {
    let budget = sel.frames.first().map(|f| f.tokens.len()).unwrap_or(0);
    if let Some(f) = sel.frames.iter().find(|f| f.tokens.len() != budget) {
        return Err(Error::Shape(format!(
            "frames keep {} and {} tokens",
            budget,
            f.tokens.len()
        )));
    }
    if sel.frames.len() != seq.frames.len() {
        return Err(Error::Shape(
            "selection and sequence disagree on frame count".into(),
        ));
    }
    let frames = seq
        .frames
        .iter()
        .zip(&sel.frames)
        .map(|(src, f)| FrameEmbedding {
            class_embedding: src.class_embedding.clone(),
            patch_embeddings: f
                .tokens
                .tokens
                .iter()
                .flat_map(|(_, t)| t.iter().copied())
                .collect(),
        })
        .collect();
    let out = FrameSequence {
        video_id: seq.video_id.clone(),
        fps: seq.fps,
        num_patches: budget,
        channels: seq.channels,
        frames,
    };
    write_sequence(&out, path)
}
