//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vadtok::tetg::{AnomalyModel, ModelFile};

/// Keep bits by pairwise ranking: patch `i` is kept when fewer than `count` patches beat it
/// (larger distance, or equal distance at a lower index).
pub fn topk_oracle(values: &[f64], k_ratio: f64) -> Vec<bool> {
    let n = values.len();
    let count = ((k_ratio * n as f64 + 0.5).floor() as usize).max(1);
    (0..n)
        .map(|i| {
            let beaten_by = (0..n)
                .filter(|&j| values[j] > values[i] || (values[j] == values[i] && j < i))
                .count();
            beaten_by < count
        })
        .collect()
}

/// P(score_pos > score_neg) + 0.5 * P(tie) over all positive/negative pairs.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
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

/// Logit computed straight from the nested on-disk weight arrays.
pub fn naive_logit(file: &ModelFile, z: &[f64]) -> f64 {
    let w1 = &file.weights[0];
    let w2 = &file.weights[1][0];
    let mut out = file.biases[1][0];
    for j in 0..w1.len() {
        let mut a = file.biases[0][j];
        for c in 0..z.len() {
            a += w1[j][c] * z[c];
        }
        if a > 0.0 {
            out += w2[j] * a;
        }
    }
    out
}

pub fn naive_loss(file: &ModelFile, normals: &[Vec<f64>], anomalies: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    if !normals.is_empty() {
        let mut s = 0.0;
        for z in normals {
            let x = naive_logit(file, z);
            s += -(1.0 / (1.0 + (-x).exp())).ln();
        }
        total += s / normals.len() as f64;
    }
    if !anomalies.is_empty() {
        let mut s = 0.0;
        for z in anomalies {
            let x = naive_logit(file, z);
            s += -((-x).exp() / (1.0 + (-x).exp())).ln();
        }
        total += s / anomalies.len() as f64;
    }
    total
}

/// Central finite differences of [`naive_loss`] over the flattened parameters.
pub fn fd_gradient(
    model: &AnomalyModel,
    normals: &[Vec<f64>],
    anomalies: &[Vec<f64>],
    h: f64,
) -> Vec<f64> {
    let base = model.params();
    let mut probe = model.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p).unwrap();
            let up = naive_loss(&probe.to_file(), normals, anomalies);
            p[i] = base[i] - h;
            probe.set_params(&p).unwrap();
            let down = naive_loss(&probe.to_file(), normals, anomalies);
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_model(rng: &mut ChaCha8Rng, c: usize, h: usize) -> AnomalyModel {
    AnomalyModel::from_parts(
        c,
        random_vec(rng, h * c, 1.0),
        random_vec(rng, h, 0.5),
        random_vec(rng, h, 1.0),
        rng.gen_range(-0.5..0.5),
    )
    .unwrap()
}

/// True when no hidden pre-activation sits close enough to the ReLU kink for a
/// stencil of width `h` around any parameter to cross it.
pub fn away_from_kinks(model: &AnomalyModel, samples: &[Vec<f64>]) -> bool {
    let file = model.to_file();
    samples.iter().all(|z| {
        let margin = 1e-3 * (1.0 + z.iter().map(|v| v.abs()).sum::<f64>());
        file.weights[0].iter().zip(&file.biases[0]).all(|(row, b)| {
            let a: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + b;
            a.abs() > margin
        })
    })
}

pub struct GradCase {
    pub model: AnomalyModel,
    pub normals: Vec<Vec<f64>>,
    pub anomalies: Vec<Vec<f64>>,
}

/// Random model and batch with every pre-activation away from the kink.
pub fn random_grad_case(rng: &mut ChaCha8Rng) -> GradCase {
    loop {
        let c = rng.gen_range(1..=6);
        let h = rng.gen_range(1..=6);
        let model = random_model(rng, c, h);
        let nn = rng.gen_range(0..=4);
        let na = rng.gen_range(if nn == 0 { 1 } else { 0 }..=4);
        let normals: Vec<Vec<f64>> = (0..nn).map(|_| random_vec(rng, c, 2.0)).collect();
        let anomalies: Vec<Vec<f64>> = (0..na).map(|_| random_vec(rng, c, 2.0)).collect();
        let all: Vec<Vec<f64>> = normals.iter().chain(&anomalies).cloned().collect();
        if away_from_kinks(&model, &all) {
            return GradCase {
                model,
                normals,
                anomalies,
            };
        }
    }
}

/// Largest relative error between analytic and finite-difference gradients.
pub fn max_gradient_error(case: &GradCase) -> f64 {
    let analytic = vadtok::tetg::gradient(&case.model, &case.normals, &case.anomalies)
        .unwrap()
        .flatten();
    let numeric = fd_gradient(&case.model, &case.normals, &case.anomalies, 1e-4);
    analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max)
}

/// Hand-rolled softmax over `q . t / sqrt(C)`.
pub fn softmax_oracle(tokens: &[Vec<f64>], query: &[f64]) -> Vec<f64> {
    let c = query.len() as f64;
    let logits: Vec<f64> = tokens
        .iter()
        .map(|t| t.iter().zip(query).map(|(a, b)| a * b).sum::<f64>() / c.sqrt())
        .collect();
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}
