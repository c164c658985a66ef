use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive frame span annotated with an anomaly category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalySpan {
    pub start_frame: usize,
    pub end_frame: usize,
    pub category: String,
}

/// Per-frame normal/anomalous labels for one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelManifest {
    pub video_id: String,
    pub num_frames: usize,
    pub frame_labels: Vec<u8>,
    pub intervals: Vec<AnomalySpan>,
    pub categories: Vec<String>,
}

impl LabelManifest {
    /// Builds a manifest whose frame labels are derived from `intervals`.
    pub fn from_intervals(
        video_id: impl Into<String>,
        num_frames: usize,
        intervals: Vec<AnomalySpan>,
        categories: Vec<String>,
    ) -> Result<Self> {
        let frame_labels = labels_from_intervals(num_frames, &intervals)?;
        let manifest = Self {
            video_id: video_id.into(),
            num_frames,
            frame_labels,
            intervals,
            categories,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_labels.len() != self.num_frames {
            return Err(Error::Shape(format!(
                "manifest has {} frame labels for num_frames={}",
                self.frame_labels.len(),
                self.num_frames
            )));
        }
        if let Some(bad) = self.frame_labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("frame label {bad} is not 0 or 1")));
        }
        let expected = labels_from_intervals(self.num_frames, &self.intervals)?;
        if expected != self.frame_labels {
            return Err(Error::invalid(
                "frame labels disagree with the annotated intervals",
            ));
        }
        Ok(())
    }

    pub fn anomalous_frames(&self) -> usize {
        self.frame_labels.iter().filter(|&&l| l == 1).count()
    }

    /// Enclosing span of all annotated intervals, if any.
    pub fn enclosing_span(&self) -> Option<(usize, usize)> {
        let start = self.intervals.iter().map(|i| i.start_frame).min()?;
        let end = self.intervals.iter().map(|i| i.end_frame).max()?;
        Some((start, end))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("label manifest", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: Self =
            serde_json::from_str(text).map_err(|e| Error::json("label manifest", e))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.validate()?;
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn labels_from_intervals(num_frames: usize, intervals: &[AnomalySpan]) -> Result<Vec<u8>> {
    let mut labels = vec![0u8; num_frames];
    for span in intervals {
        if span.start_frame > span.end_frame || span.end_frame >= num_frames {
            return Err(Error::invalid(format!(
                "interval [{}, {}] is not within 0..{num_frames}",
                span.start_frame, span.end_frame
            )));
        }
        labels[span.start_frame..=span.end_frame].fill(1);
    }
    Ok(labels)
}
