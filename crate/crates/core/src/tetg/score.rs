use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{sigmoid, AnomalyModel};
use crate::error::{Error, Result};
use crate::store::FrameSequence;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Per-frame anomaly confidence for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    pub video_id: String,
    pub fps: f64,
    pub scores: Vec<f64>,
}

/// Inclusive frame span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl FrameSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!(
                "span start {start} exceeds end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..=self.end).contains(&t)
    }
}

/// First-to-last span of frames whose score reaches `threshold`; `span` is `None` when no frame does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalInterval {
    pub span: Option<FrameSpan>,
    pub threshold: f64,
}

impl TemporalInterval {
    pub fn is_present(&self) -> bool {
        self.span.is_some()
    }
}

/// `1 - sigmoid(logit)` for every frame's class embedding.
pub fn score_sequence(model: &AnomalyModel, seq: &FrameSequence) -> Result<ScoredSequence> {
    if seq.channels != model.input_dim() {
        return Err(Error::Shape(format!(
            "class embeddings have {} channels, model expects {}",
            seq.channels,
            model.input_dim()
        )));
    }
    let scores = seq
        .class_embeddings_f64()
        .par_iter()
        .map(|z| model.forward(z).map(anomaly_score))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoredSequence {
        video_id: seq.video_id.clone(),
        fps: f64::from(seq.fps),
        scores,
    })
}

/// Anomaly confidence from a classifier logit (high logit = normal).
pub fn anomaly_score(logit: f64) -> f64 {
    1.0 - sigmoid(logit)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )))
    }
}

pub fn extract_interval(scored: &ScoredSequence, threshold: f64) -> Result<TemporalInterval> {
    check_threshold(threshold)?;
    let qualifies = |s: &f64| *s >= threshold;
    let span = scored
        .scores
        .iter()
        .position(qualifies)
        .map(|start| FrameSpan {
            start,
            end: scored.scores.iter().rposition(qualifies).unwrap_or(start),
        });
    Ok(TemporalInterval { span, threshold })
}

/// Maximal runs of consecutive frames at or above `threshold`.
///
/// This splits the enclosing span returned by [`extract_interval`] at gaps.
pub fn extract_islands(scored: &ScoredSequence, threshold: f64) -> Result<Vec<FrameSpan>> {
    check_threshold(threshold)?;
    let mut out: Vec<FrameSpan> = Vec::new();
    for (t, &s) in scored.scores.iter().enumerate() {
        if s < threshold {
            continue;
        }
        match out.last_mut() {
            Some(span) if span.end + 1 == t => span.end = t,
            _ => out.push(FrameSpan { start: t, end: t }),
        }
    }
    Ok(out)
}

/// Centered moving average; the window is clipped at the sequence ends.
pub fn smooth_scores(scores: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("smoothing window must be positive"));
    }
    let back = (window - 1) / 2;
    let ahead = window / 2;
    Ok((0..scores.len())
        .map(|t| {
            let lo = t.saturating_sub(back);
            let hi = (t + ahead).min(scores.len() - 1);
            scores[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect())
}

/// On-disk scores document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoresFile {
    pub video_id: String,
    pub fps: f64,
    pub threshold: f64,
    pub scores: Vec<f64>,
}

impl ScoresFile {
    pub fn new(scored: &ScoredSequence, threshold: f64) -> Self {
        Self {
            video_id: scored.video_id.clone(),
            fps: scored.fps,
            threshold,
            scores: scored.scores.clone(),
        }
    }

    pub fn scored(&self) -> ScoredSequence {
        ScoredSequence {
            video_id: self.video_id.clone(),
            fps: self.fps,
            scores: self.scores.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid("scores file fps must be positive"));
        }
        if let Some(s) = self.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!("score {s} outside [0, 1]")));
        }
        check_threshold(self.threshold)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).map_err(|e| Error::json("scores", e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        file.validate()?;
        Ok(file)
    }
}
