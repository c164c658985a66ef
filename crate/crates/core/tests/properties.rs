//! Invariants over randomly generated inputs.

mod common;

use common::{pairwise_auc, topk_oracle};
use proptest::collection::vec;
use proptest::prelude::*;
use vadtok::eval::{auc_from_scores, temporal_iou};
use vadtok::sets::{
    attention_weights, content_token, difference_map, select_tokens, selection_budget,
    selection_mask, DifferenceMap, EffectiveTokenSet,
};
use vadtok::store::{
    decode_sequence, encode_sequence, generate_synthetic, FrameEmbedding, FrameSequence, Patches,
    SyntheticSpec,
};
use vadtok::tetg::{anomaly_score, bce_loss, AnomalyModel, FrameSpan};

fn sequence() -> impl Strategy<Value = FrameSequence> {
    (1usize..4, 1usize..5, 1usize..4, 0.1f32..120.0).prop_flat_map(|(t, n, c, fps)| {
        vec((vec(-1e6f32..1e6, n * c), vec(-1e6f32..1e6, c)), t).prop_map(move |frames| {
            FrameSequence {
                video_id: "clip".into(),
                fps,
                num_patches: n,
                channels: c,
                frames: frames
                    .into_iter()
                    .map(|(p, z)| FrameEmbedding::new(p, z))
                    .collect(),
            }
        })
    })
}

fn matrix_pair() -> impl Strategy<Value = (usize, usize, Vec<f32>, Vec<f32>)> {
    (1usize..12, 1usize..6).prop_flat_map(|(n, c)| {
        (
            Just(n),
            Just(c),
            vec(-100.0f32..100.0, n * c),
            vec(-100.0f32..100.0, n * c),
        )
    })
}

fn span() -> impl Strategy<Value = Option<FrameSpan>> {
    prop::option::of((0usize..30, 0usize..30).prop_map(|(a, b)| FrameSpan {
        start: a.min(b),
        end: a.max(b),
    }))
}

proptest! {
    #[test]
    fn vaeb_round_trip(seq in sequence()) {
        let bytes = encode_sequence(&seq).unwrap();
        let back = decode_sequence(&bytes, "clip").unwrap();
        prop_assert_eq!(&back, &seq);
        prop_assert_eq!(encode_sequence(&back).unwrap(), bytes);
    }

    #[test]
    fn generator_is_pure(t in 1usize..20, n in 1usize..6, c in 1usize..5, seed in any::<u64>(), shift in 0.0f64..3.0) {
        let mut spec = SyntheticSpec::new(t, n, c, seed).with_mean_shift(shift);
        spec.anomaly = Some((t / 3, t - 1));
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        prop_assert_eq!(&a, &b);
        let (_, manifest) = a;
        prop_assert!(manifest.validate().is_ok());
    }

    #[test]
    fn difference_map_symmetry_shift_and_scale((n, c, a, b) in matrix_pair(), alpha in 0.0f32..4.0, offset in -50.0f32..50.0) {
        let pa = Patches::new(&a, n, c).unwrap();
        let pb = Patches::new(&b, n, c).unwrap();
        let d = difference_map(pa, pb).unwrap();
        let reversed = difference_map(pb, pa).unwrap();
        prop_assert_eq!(d.values(), reversed.values());
        prop_assert!(d.values().iter().all(|v| *v >= 0.0));

        // f32 inputs round after shifting/scaling, hence the tolerances
        let sa: Vec<f32> = a.iter().map(|v| v + offset).collect();
        let sb: Vec<f32> = b.iter().map(|v| v + offset).collect();
        let ds = difference_map(Patches::new(&sa, n, c).unwrap(), Patches::new(&sb, n, c).unwrap()).unwrap();
        for (x, y) in ds.values().iter().zip(d.values()) {
            prop_assert!((x - y).abs() <= 1e-4 * (1.0 + y.abs()));
        }
        let xa: Vec<f32> = a.iter().map(|v| v * alpha).collect();
        let xb: Vec<f32> = b.iter().map(|v| v * alpha).collect();
        let dx = difference_map(Patches::new(&xa, n, c).unwrap(), Patches::new(&xb, n, c).unwrap()).unwrap();
        for (x, y) in dx.values().iter().zip(d.values()) {
            prop_assert!((x - f64::from(alpha) * y).abs() <= 1e-4 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn mask_invariant_under_power_of_two_scaling((n, c, a, b) in matrix_pair(), exp in -4i32..5, k in 0.01f64..=1.0) {
        let alpha = 2f32.powi(exp);
        let mask = |x: &[f32], y: &[f32]| {
            let d = difference_map(Patches::new(x, n, c).unwrap(), Patches::new(y, n, c).unwrap()).unwrap();
            selection_mask(&d, k).unwrap()
        };
        let xa: Vec<f32> = a.iter().map(|v| v * alpha).collect();
        let xb: Vec<f32> = b.iter().map(|v| v * alpha).collect();
        prop_assert_eq!(mask(&a, &b).bits, mask(&xa, &xb).bits);
    }

    #[test]
    fn count_law_and_dominance(values in vec(0.0f64..10.0, 1..64), k in 0.001f64..=1.0) {
        let mask = selection_mask(&DifferenceMap::new(values.clone()).unwrap(), k).unwrap();
        let expected = ((k * values.len() as f64 + 0.5).floor() as usize).max(1);
        prop_assert_eq!(mask.selected_count, expected);
        prop_assert_eq!(mask.bits.iter().filter(|b| **b).count(), expected);
        prop_assert_eq!(selection_budget(k, values.len()).unwrap(), expected);
        let min_kept = values.iter().zip(&mask.bits).filter(|(_, b)| **b).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let max_dropped = values.iter().zip(&mask.bits).filter(|(_, b)| !**b).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(min_kept >= max_dropped);
        prop_assert_eq!(mask.bits, topk_oracle(&values, k));
    }

    #[test]
    fn tokens_are_ordered_subset((n, c, a, b) in matrix_pair(), k in 0.01f64..=1.0) {
        let frame = Patches::new(&a, n, c).unwrap();
        let d = difference_map(frame, Patches::new(&b, n, c).unwrap()).unwrap();
        let set = select_tokens(frame, &selection_mask(&d, k).unwrap()).unwrap();
        prop_assert!(set.indices().windows(2).all(|w| w[0] < w[1]));
        for (i, tok) in &set.tokens {
            prop_assert_eq!(tok.as_slice(), frame.row(*i));
        }
    }

    #[test]
    fn content_token_permutation_invariant_and_bounded(toks in vec(vec(-50.0f32..50.0, 3), 1..8), rot in 0usize..8) {
        let set = EffectiveTokenSet { tokens: toks.iter().cloned().enumerate().collect() };
        let mut rotated = set.tokens.clone();
        let len = rotated.len();
        rotated.rotate_left(rot % len);
        rotated.reverse();
        let a = content_token(&set).unwrap();
        let b = content_token(&EffectiveTokenSet { tokens: rotated }).unwrap();
        for ch in 0..3 {
            prop_assert!((a[ch] - b[ch]).abs() <= 1e-9);
            let lo = toks.iter().map(|t| f64::from(t[ch])).fold(f64::INFINITY, f64::min);
            let hi = toks.iter().map(|t| f64::from(t[ch])).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a[ch] >= lo - 1e-9 && a[ch] <= hi + 1e-9);
        }
    }

    #[test]
    fn attention_weights_form_distribution(toks in vec(vec(-20.0f32..20.0, 4), 1..10), q in vec(-20.0f64..20.0, 4)) {
        let set = EffectiveTokenSet { tokens: toks.into_iter().enumerate().collect() };
        let w = attention_weights(&set, &q).unwrap();
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn score_is_complement_and_decreasing(x1 in -30.0f64..30.0, x2 in -30.0f64..30.0) {
        let (s1, s2) = (anomaly_score(x1), anomaly_score(x2));
        prop_assert!((0.0..=1.0).contains(&s1));
        prop_assert!((s1 + 1.0 / (1.0 + (-x1).exp()) - 1.0).abs() <= 1e-15);
        if x1 > x2 {
            prop_assert!(s1 < s2);
        }
    }

    #[test]
    fn loss_is_non_negative(w in vec(-3.0f64..3.0, 6), b in vec(-1.0f64..1.0, 2), w2 in vec(-3.0f64..3.0, 2),
                            normals in vec(vec(-5.0f64..5.0, 3), 0..5), anomalies in vec(vec(-5.0f64..5.0, 3), 1..5)) {
        let model = AnomalyModel::from_parts(3, w, b, w2, 0.1).unwrap();
        prop_assert!(bce_loss(&model, &normals, &anomalies).unwrap() >= 0.0);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in span(), b in span()) {
        let x = temporal_iou(a, b);
        prop_assert_eq!(x, temporal_iou(b, a));
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn auc_equals_pairwise_probability(pairs in vec((0u8..6, 0u8..2), 2..50)) {
        let scores: Vec<f64> = pairs.iter().map(|(s, _)| f64::from(*s) / 5.0).collect();
        let labels: Vec<u8> = pairs.iter().map(|(_, l)| *l).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let auc = auc_from_scores(&scores, &labels).unwrap();
        prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() <= 1e-12);
    }
}
