//! Spatial effective token selection.
//!
//! Each frame is compared with its predecessor patch by patch (Manhattan
//! distance over channels). The `K` fraction of patches with the largest
//! distances is kept; the kept tokens are pooled into a content token and
//! attended over with a text query to form a context token.

mod output;

pub use output::{write_token_sidecar, FrameSelectionRecord, SelectionFile};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::{FrameSequence, Patches};

pub const DEFAULT_K_RATIO: f64 = 0.5;

/// Per-patch distances between a frame and its reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMap {
    values: Vec<f64>,
}

impl DifferenceMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "difference values must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    pub bits: Vec<bool>,
    pub k_ratio: f64,
    pub selected_count: usize,
}

impl SelectionMask {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// Selected patches of one frame, in ascending patch order.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTokenSet {
    pub tokens: Vec<(usize, Vec<f32>)>,
}

impl EffectiveTokenSet {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.tokens.iter().map(|(i, _)| *i).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTokens {
    pub content_token: Vec<f64>,
    pub context_token: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSelection {
    pub mask: SelectionMask,
    pub tokens: EffectiveTokenSet,
    pub frame_tokens: FrameTokens,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStats {
    pub num_patches: usize,
    pub selected_counts: Vec<usize>,
    pub mean_selected: f64,
    pub compression_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSelection {
    pub k_ratio: f64,
    pub frames: Vec<FrameSelection>,
    pub stats: SelectionStats,
}

/// Number of tokens kept for ratio `k_ratio` over `n` patches: `max(1, round_half_up(k * n))`.
pub fn selection_budget(k_ratio: f64, n: usize) -> Result<usize> {
    check_ratio(k_ratio)?;
    let raw = (k_ratio * n as f64 + 0.5).floor() as usize;
    Ok(raw.clamp(1, n.max(1)))
}

fn check_ratio(k_ratio: f64) -> Result<()> {
    if k_ratio > 0.0 && k_ratio <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "k ratio must lie in (0, 1], got {k_ratio}"
        )))
    }
}

pub fn difference_map(current: Patches<'_>, previous: Patches<'_>) -> Result<DifferenceMap> {
    if current.rows() != previous.rows() || current.cols() != previous.cols() {
        return Err(Error::Shape(format!(
            "frames are {}x{} and {}x{}",
            current.rows(),
            current.cols(),
            previous.rows(),
            previous.cols()
        )));
    }
    if current
        .as_slice()
        .iter()
        .chain(previous.as_slice())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            what: "patch embeddings".into(),
        });
    }
    let values = (0..current.rows())
        .map(|i| {
            current
                .row(i)
                .iter()
                .zip(previous.row(i))
                .map(|(&a, &b)| (f64::from(a) - f64::from(b)).abs())
                .sum()
        })
        .collect();
    Ok(DifferenceMap { values })
}

/// Keeps the largest distances; equal distances prefer the lower patch index.
pub fn selection_mask(d: &DifferenceMap, k_ratio: f64) -> Result<SelectionMask> {
    if d.is_empty() {
        return Err(Error::invalid("difference map is empty"));
    }
    let count = selection_budget(k_ratio, d.len())?;
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d.values[b].total_cmp(&d.values[a]).then(a.cmp(&b)));
    let mut bits = vec![false; d.len()];
    for &i in &order[..count] {
        bits[i] = true;
    }
    Ok(SelectionMask {
        bits,
        k_ratio,
        selected_count: count,
    })
}

pub fn select_tokens(frame: Patches<'_>, mask: &SelectionMask) -> Result<EffectiveTokenSet> {
    if mask.bits.len() != frame.rows() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} patches",
            mask.bits.len(),
            frame.rows()
        )));
    }
    let tokens = mask
        .bits
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(i, _)| (i, frame.row(i).to_vec()))
        .collect();
    Ok(EffectiveTokenSet { tokens })
}

/// Coordinate-wise mean of the selected tokens.
pub fn content_token(set: &EffectiveTokenSet) -> Result<Vec<f64>> {
    let first = set
        .tokens
        .first()
        .ok_or_else(|| Error::invalid("empty token set"))?;
    let mut acc = vec![0.0; first.1.len()];
    for (_, tok) in &set.tokens {
        for (a, &v) in acc.iter_mut().zip(tok) {
            *a += f64::from(v);
        }
    }
    let n = set.tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Softmax weights of the tokens against `query`, scaled by `1/sqrt(C)`.
pub fn attention_weights(set: &EffectiveTokenSet, query: &[f64]) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::invalid("empty token set"));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "text query".into(),
        });
    }
    let c = query.len();
    if let Some((i, tok)) = set.tokens.iter().find(|(_, t)| t.len() != c) {
        return Err(Error::Shape(format!(
            "token {i} has {} channels, query has {c}",
            tok.len()
        )));
    }
    let scale = 1.0 / (c as f64).sqrt();
    let logits: Vec<f64> = set
        .tokens
        .iter()
        .map(|(_, tok)| {
            tok.iter()
                .zip(query)
                .map(|(&t, &q)| f64::from(t) * q)
                .sum::<f64>()
                * scale
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Attention-weighted sum of the selected tokens under a single text query.
pub fn context_token(set: &EffectiveTokenSet, text_query: &[f64]) -> Result<Vec<f64>> {
    let weights = attention_weights(set, text_query)?;
    let mut out = vec![0.0; text_query.len()];
    for ((_, tok), w) in set.tokens.iter().zip(weights) {
        for (o, &v) in out.iter_mut().zip(tok) {
            *o += w * f64::from(v);
        }
    }
    Ok(out)
}

pub fn token_stats(selected_counts: &[usize], num_patches: usize) -> Result<SelectionStats> {
    if selected_counts.is_empty() {
        return Err(Error::invalid("no selection results"));
    }
    if num_patches == 0 {
        return Err(Error::invalid("patch count must be positive"));
    }
    let mean_selected = selected_counts.iter().sum::<usize>() as f64 / selected_counts.len() as f64;
    Ok(SelectionStats {
        num_patches,
        selected_counts: selected_counts.to_vec(),
        mean_selected,
        compression_ratio: 1.0 - mean_selected / num_patches as f64,
    })
}

/// Runs selection over every frame, each frame referencing its predecessor.
///
/// Frame 0 is its own reference, so its map is all zeros and the mask falls back
/// to the lowest patch indices. `text_query` defaults to the zero vector, which
/// makes the context token the plain mean.
pub fn process_sequence(
    seq: &FrameSequence,
    k_ratio: f64,
    text_query: Option<&[f64]>,
) -> Result<SequenceSelection> {
    seq.validate()?;
    check_ratio(k_ratio)?;
    let c = seq.channels;
    let zero_query = vec![0.0; c];
    let query = text_query.unwrap_or(&zero_query);
    if query.len() != c {
        return Err(Error::Shape(format!(
            "text query has {} channels, frames have {c}",
            query.len()
        )));
    }

    let frames = (0..seq.frames.len())
        .into_par_iter()
        .map(|t| {
            let current = seq.frames[t].patches(c);
            let previous = seq.frames[t.saturating_sub(1)].patches(c);
            let map = difference_map(current, previous)?;
            let mask = selection_mask(&map, k_ratio)?;
            let tokens = select_tokens(current, &mask)?;
            let frame_tokens = FrameTokens {
                content_token: content_token(&tokens)?,
                context_token: context_token(&tokens, query)?,
            };
            Ok(FrameSelection {
                mask,
                tokens,
                frame_tokens,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let counts: Vec<usize> = frames.iter().map(|f| f.mask.selected_count).collect();
    let stats = token_stats(&counts, seq.num_patches)?;
    Ok(SequenceSelection {
        k_ratio,
        frames,
        stats,
    })
}
