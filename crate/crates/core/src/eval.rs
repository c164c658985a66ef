//! Frame-level AUC, temporal IoU, token budgets and the K-ratio ablation.
//!
//! Question-answering accuracy needs a language model and is not measured here;
//! frame AUC and temporal IoU stand in as the classifier- and localisation-side
//! projections of the same capability.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::{process_sequence, selection_budget};
use crate::store::{FrameSequence, LabelManifest};
use crate::tetg::{extract_interval, score_sequence, AnomalyModel, FrameSpan, ScoredSequence};

pub const REPORT_NOTE: &str = "frame_auc and temporal_iou are classifier-level proxies; \
language-model question-answering accuracy is not measured";

/// Paper ablation grid for the token keep ratio.
pub const ABLATION_K: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// ROC AUC via the Mann-Whitney rank statistic; tied scores get their average rank.
pub fn auc_from_scores(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite {
            what: "scores".into(),
        });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "frame AUC needs both normal and anomalous frames".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        positive_rank_sum +=
            mean_rank * order[i..j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn frame_auc(scored: &ScoredSequence, labels: &LabelManifest) -> Result<f64> {
    auc_from_scores(&scored.scores, &labels.frame_labels)
}

/// Intersection over union of inclusive frame sets. Two absent spans score 1.
pub fn temporal_iou(pred: Option<FrameSpan>, gt: Option<FrameSpan>) -> f64 {
    match (pred, gt) {
        (None, None) => 1.0,
        (None, Some(_)) | (Some(_), None) => 0.0,
        (Some(p), Some(g)) => {
            let lo = p.start.max(g.start);
            let hi = p.end.min(g.end);
            let inter = if lo <= hi { hi - lo + 1 } else { 0 };
            let union = p.len() + g.len() - inter;
            inter as f64 / union as f64
        }
    }
}

/// Ground-truth span for IoU: the enclosing span of the manifest's intervals.
pub fn ground_truth_span(labels: &LabelManifest) -> Option<FrameSpan> {
    labels
        .enclosing_span()
        .map(|(start, end)| FrameSpan { start, end })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KResult {
    pub k: f64,
    pub selected_per_frame: usize,
    pub compression_ratio: f64,
    pub iou: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub note: String,
    pub video_id: String,
    pub frame_auc: f64,
    pub temporal_iou: f64,
    pub compression_ratio: f64,
    pub predicted_interval: Option<FrameSpan>,
    pub ground_truth_interval: Option<FrameSpan>,
    pub per_k_results: Vec<KResult>,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name}={v} outside [0, 1]")))
            }
        };
        unit("frame_auc", self.frame_auc)?;
        unit("temporal_iou", self.temporal_iou)?;
        unit("compression_ratio", self.compression_ratio)?;
        for row in &self.per_k_results {
            unit("auc", row.auc)?;
            unit("iou", row.iou)?;
            unit("compression_ratio", row.compression_ratio)?;
        }
        if self.per_k_results.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(Error::invalid(
                "per-K results must be strictly ascending in k",
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("report", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("report", e))
    }
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    report.validate()?;
    let mut text = report.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs selection, scoring and interval extraction for every `k` and checks the budget law.
///
/// Rows come back sorted by `k`. Scores only depend on class embeddings, so the
/// AUC and IoU columns do not vary with `k`.
pub fn ablate_k(
    seq: &FrameSequence,
    labels: &LabelManifest,
    model: &AnomalyModel,
    k_list: &[f64],
    threshold: f64,
) -> Result<Vec<KResult>> {
    if labels.num_frames != seq.num_frames() {
        return Err(Error::Shape(format!(
            "manifest covers {} frames, sequence has {}",
            labels.num_frames,
            seq.num_frames()
        )));
    }
    let mut ks = k_list.to_vec();
    for &k in &ks {
        selection_budget(k, seq.num_patches)?;
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let gt = ground_truth_span(labels);

    ks.par_iter()
        .map(|&k| {
            let selection = process_sequence(seq, k, None)?;
            let expected = selection_budget(k, seq.num_patches)?;
            if let Some(&found) = selection
                .stats
                .selected_counts
                .iter()
                .find(|&&c| c != expected)
            {
                return Err(Error::BudgetLaw { k, expected, found });
            }
            let scored = score_sequence(model, seq)?;
            let interval = extract_interval(&scored, threshold)?;
            Ok(KResult {
                k,
                selected_per_frame: expected,
                compression_ratio: selection.stats.compression_ratio,
                iou: temporal_iou(interval.span, gt),
                auc: frame_auc(&scored, labels)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> Option<FrameSpan> {
        Some(FrameSpan { start: s, end: e })
    }

    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_small_cases() {
        let s = [0.9, 0.8, 0.7, 0.1];
        assert_eq!(auc_from_scores(&s, &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc_from_scores(&s, &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(pairwise_auc(&s, &[1, 0, 1, 0]), 0.75);
    }

    #[test]
    fn auc_reversal_and_ties() {
        let s = [0.2, 0.2, 0.5, 0.9, 0.5, 0.1];
        let l = [1, 0, 1, 1, 0, 0];
        let a = auc_from_scores(&s, &l).unwrap();
        assert!((a - pairwise_auc(&s, &l)).abs() < 1e-15);
        let rev: Vec<f64> = s.iter().map(|v| -v).collect();
        assert!((auc_from_scores(&rev, &l).unwrap() - (1.0 - a)).abs() < 1e-15);
        assert_eq!(auc_from_scores(&[0.3; 4], &[1, 0, 0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn auc_undefined_for_one_class() {
        assert!(matches!(
            auc_from_scores(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            auc_from_scores(&[0.1], &[1, 0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn iou_cases() {
        assert_eq!(temporal_iou(span(2, 4), span(3, 5)), 0.5);
        assert_eq!(temporal_iou(span(2, 4), span(2, 4)), 1.0);
        assert_eq!(temporal_iou(span(0, 1), span(5, 9)), 0.0);
        assert_eq!(temporal_iou(None, span(5, 9)), 0.0);
        assert_eq!(temporal_iou(span(5, 9), None), 0.0);
        assert_eq!(temporal_iou(None, None), 1.0);
        assert_eq!(temporal_iou(span(3, 3), span(3, 3)), 1.0);
    }

    #[test]
    fn report_round_trip_and_validation() {
        let report = EvalReport {
            note: REPORT_NOTE.into(),
            video_id: "v".into(),
            frame_auc: 0.75,
            temporal_iou: 0.5,
            compression_ratio: 0.5,
            predicted_interval: span(1, 2),
            ground_truth_interval: None,
            per_k_results: vec![],
            config: serde_json::json!({"k_ratio": 0.5}),
        };
        let text = report.to_json().unwrap();
        assert!(text.contains("\"per_k_results\": []"));
        assert_eq!(EvalReport::from_json(&text).unwrap(), report);

        let mut bad = report.clone();
        bad.frame_auc = 1.5;
        assert!(bad.validate().is_err());
        let row = |k| KResult {
            k,
            selected_per_frame: 1,
            compression_ratio: 0.5,
            iou: 0.0,
            auc: 0.5,
        };
        bad = report;
        bad.per_k_results = vec![row(0.5), row(0.1)];
        assert!(bad.validate().is_err());
    }
}
