//! Temporal effective tokens: an anomaly-aware classifier over class embeddings,
//! per-frame anomaly scores, interval extraction and prompt rendering.

mod model;
mod prompt;
mod score;
mod train;

pub use model::{
    bce_loss, gradient, AnomalyModel, Gradients, ModelFile, TrainConfig, MODEL_FORMAT_VERSION,
};
pub use prompt::{
    default_categories, format_timestamp, render_span, render_tet, TetPrompt, TimestampFormat,
    DEFAULT_CATEGORIES,
};
pub use score::{
    anomaly_score, extract_interval, extract_islands, score_sequence, smooth_scores, FrameSpan,
    ScoredSequence, ScoresFile, TemporalInterval, DEFAULT_THRESHOLD,
};
pub use train::{init_model, train, TrainingLog};

use crate::error::Result;
use crate::store::{FrameSequence, LabelManifest};

/// Class embeddings grouped as (normal, anomalous).
pub type LabeledEmbeddings = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Splits a labeled sequence's class embeddings into (normal, anomalous) sets.
pub fn split_by_labels(seq: &FrameSequence, labels: &LabelManifest) -> Result<LabeledEmbeddings> {
    if labels.num_frames != seq.num_frames() {
        return Err(crate::Error::Shape(format!(
            "manifest covers {} frames, sequence has {}",
            labels.num_frames,
            seq.num_frames()
        )));
    }
    let mut normals = Vec::new();
    let mut anomalies = Vec::new();
    for (z, &label) in seq
        .class_embeddings_f64()
        .into_iter()
        .zip(&labels.frame_labels)
    {
        if label == 1 {
            anomalies.push(z);
        } else {
            normals.push(z);
        }
    }
    Ok((normals, anomalies))
}
