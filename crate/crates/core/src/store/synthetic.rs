//! Labeled synthetic embedding streams with a planted anomaly.
//!
//! Every frame is `base + noise_scale * e` with `e ~ N(0, 1)` i.i.d. The base
//! depends only on `(N, C)`, so sequences with different seeds are independent
//! draws from one distribution and can serve as held-out data for each other.
//! Frames inside the anomaly interval additionally get `mean_shift` added to
//! every class-embedding coordinate and to every channel of the patches in
//! `anomaly_region`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{AnomalySpan, FrameEmbedding, FrameSequence, LabelManifest};
use crate::error::{Error, Result};

const BASE_SEED: u64 = 0x5EED_BA5E;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub video_id: String,
    pub num_frames: usize,
    pub num_patches: usize,
    pub channels: usize,
    /// Inclusive `(start, end)` frame span of the planted anomaly.
    pub anomaly: Option<(usize, usize)>,
    pub anomaly_region: Vec<usize>,
    pub mean_shift: f64,
    pub noise_scale: f64,
    pub fps: f32,
    pub category: String,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Spec with the anomaly region defaulting to the first quarter of the patch grid.
    pub fn new(num_frames: usize, num_patches: usize, channels: usize, seed: u64) -> Self {
        Self {
            video_id: "synthetic".into(),
            num_frames,
            num_patches,
            channels,
            anomaly: None,
            anomaly_region: (0..num_patches.div_ceil(4)).collect(),
            mean_shift: 2.0,
            noise_scale: 1.0,
            fps: 30.0,
            category: "Anomaly".into(),
            seed,
        }
    }

    pub fn with_anomaly(mut self, start: usize, end: usize) -> Self {
        self.anomaly = Some((start, end));
        self
    }

    pub fn with_mean_shift(mut self, shift: f64) -> Self {
        self.mean_shift = shift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_frames == 0 || self.num_patches == 0 || self.channels == 0 {
            return Err(Error::invalid("T, N and C must all be positive"));
        }
        if let Some(&bad) = self.anomaly_region.iter().find(|&&p| p >= self.num_patches) {
            return Err(Error::invalid(format!(
                "anomaly region patch {bad} outside 0..{}",
                self.num_patches
            )));
        }
        if let Some((s, e)) = self.anomaly {
            if s > e || e >= self.num_frames {
                return Err(Error::invalid(format!(
                    "anomaly span {s}:{e} outside 0..{}",
                    self.num_frames
                )));
            }
        }
        if !(self.mean_shift.is_finite() && self.mean_shift >= 0.0) {
            return Err(Error::invalid("mean_shift must be finite and >= 0"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(Error::invalid("noise_scale must be finite and > 0"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid("fps must be positive"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FrameSequence, LabelManifest)> {
    spec.validate()?;
    let (n, c) = (spec.num_patches, spec.channels);
    let mut base_rng = ChaCha8Rng::seed_from_u64(BASE_SEED);
    let base_class: Vec<f64> = (0..c)
        .map(|_| StandardNormal.sample(&mut base_rng))
        .collect();
    let base_patches: Vec<f64> = (0..n * c)
        .map(|_| StandardNormal.sample(&mut base_rng))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut in_region = vec![false; n];
    for &p in &spec.anomaly_region {
        in_region[p] = true;
    }

    let mut frames = Vec::with_capacity(spec.num_frames);
    for t in 0..spec.num_frames {
        let anomalous = spec.anomaly.is_some_and(|(s, e)| (s..=e).contains(&t));
        let shift = if anomalous { spec.mean_shift } else { 0.0 };
        let class_embedding = base_class
            .iter()
            .map(|&b| (b + spec.noise_scale * normal() + shift) as f32)
            .collect();
        let patch_embeddings = base_patches
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let s = if in_region[i / c] { shift } else { 0.0 };
                (b + spec.noise_scale * normal() + s) as f32
            })
            .collect();
        frames.push(FrameEmbedding {
            patch_embeddings,
            class_embedding,
        });
    }

    let seq = FrameSequence {
        video_id: spec.video_id.clone(),
        fps: spec.fps,
        num_patches: n,
        channels: c,
        frames,
    };
    let intervals = spec
        .anomaly
        .map(|(s, e)| {
            vec![AnomalySpan {
                start_frame: s,
                end_frame: e,
                category: spec.category.clone(),
            }]
        })
        .unwrap_or_default();
    let categories = if intervals.is_empty() {
        Vec::new()
    } else {
        vec![spec.category.clone()]
    };
    let manifest = LabelManifest::from_intervals(
        spec.video_id.clone(),
        spec.num_frames,
        intervals,
        categories,
    )?;
    Ok((seq, manifest))
}
