//! Embedding streams, their on-disk format and label manifests.
//!
//! A [`FrameSequence`] carries per-frame patch embeddings (`N x C`, patch-major)
//! plus a `C`-dimensional class embedding. Values are kept as `f32`, matching the
//! file format bit for bit; numeric code widens to `f64` on read.

mod manifest;
mod synthetic;
mod vaeb;

pub use manifest::{AnomalySpan, LabelManifest};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use vaeb::{
    decode_sequence, encode_sequence, read_sequence, write_sequence, HEADER_LEN, MAGIC, VERSION,
};

use crate::error::{Error, Result};

/// One frame: `N x C` patch embeddings in row-major order plus the class embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmbedding {
    pub patch_embeddings: Vec<f32>,
    pub class_embedding: Vec<f32>,
}

impl FrameEmbedding {
    pub fn new(patch_embeddings: Vec<f32>, class_embedding: Vec<f32>) -> Self {
        Self {
            patch_embeddings,
            class_embedding,
        }
    }

    /// Borrowed view of the patch matrix given the channel count.
    pub fn patches(&self, channels: usize) -> Patches<'_> {
        Patches {
            data: &self.patch_embeddings,
            rows: self
                .patch_embeddings
                .len()
                .checked_div(channels)
                .unwrap_or(0),
            cols: channels,
        }
    }
}

/// Row-major `rows x cols` view over a patch embedding buffer.
#[derive(Debug, Clone, Copy)]
pub struct Patches<'a> {
    data: &'a [f32],
    rows: usize,
    cols: usize,
}

impl<'a> Patches<'a> {
    pub fn new(data: &'a [f32], rows: usize, cols: usize) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Shape(format!(
                "buffer of {} values cannot be viewed as {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &'a [f32] {
        self.data
    }
}

/// A video's stream of frame embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub video_id: String,
    pub fps: f32,
    pub num_patches: usize,
    pub channels: usize,
    pub frames: Vec<FrameEmbedding>,
}

impl FrameSequence {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Checks shape consistency, `fps > 0`, `T >= 1` and finiteness of every value.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::invalid("sequence must contain at least one frame"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid(format!(
                "fps must be positive and finite, got {}",
                self.fps
            )));
        }
        if self.num_patches == 0 || self.channels == 0 {
            return Err(Error::invalid(format!(
                "patch count and channel count must be positive, got N={} C={}",
                self.num_patches, self.channels
            )));
        }
        let patch_len = self.num_patches * self.channels;
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.class_embedding.len() != self.channels {
                return Err(Error::Shape(format!(
                    "frame {t}: class embedding has {} channels, expected {}",
                    frame.class_embedding.len(),
                    self.channels
                )));
            }
            if frame.patch_embeddings.len() != patch_len {
                return Err(Error::Shape(format!(
                    "frame {t}: {} patch values, expected {patch_len}",
                    frame.patch_embeddings.len()
                )));
            }
            if frame
                .class_embedding
                .iter()
                .chain(&frame.patch_embeddings)
                .any(|v| !v.is_finite())
            {
                return Err(Error::NonFinite {
                    what: format!("frame {t}"),
                });
            }
        }
        Ok(())
    }

    pub fn class_embeddings_f64(&self) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|f| f.class_embedding.iter().map(|&v| f64::from(v)).collect())
            .collect()
    }
}
