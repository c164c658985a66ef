use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::model::{gradient_unchecked, loss_unchecked, AnomalyModel, TrainConfig};
use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Full-data loss after every epoch, plus the loss at initialisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses
            .last()
            .copied()
            .unwrap_or(self.initial_loss)
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        Ok(())
    }
}

/// He-uniform hidden layer, Glorot-uniform output layer, zero biases.
pub fn init_model(input_dim: usize, config: &TrainConfig, rng: &mut ChaCha8Rng) -> AnomalyModel {
    let mut model = AnomalyModel::zeros(input_dim, config.hidden);
    let hidden_bound = (6.0 / input_dim as f64).sqrt();
    let out_bound = (6.0 / (config.hidden as f64 + 1.0)).sqrt();
    let hidden_dist = Uniform::new_inclusive(-hidden_bound, hidden_bound);
    let out_dist = Uniform::new_inclusive(-out_bound, out_bound);
    model
        .w1
        .iter_mut()
        .for_each(|w| *w = hidden_dist.sample(rng));
    model.w2.iter_mut().for_each(|w| *w = out_dist.sample(rng));
    model.train_config = config.clone();
    model
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - BETA1.powi(self.step);
        let c2 = 1.0 - BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * grads[i];
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * grads[i] * grads[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPSILON);
        }
    }
}

/// Trains the classifier with mini-batch Adam.
///
/// Every epoch shuffles the pooled samples with a generator seeded from
/// `config.seed`; each mini-batch minimises the two-term loss over whichever
/// classes it happens to contain.
pub fn train<S: AsRef<[f64]>>(
    normals: &[S],
    anomalies: &[S],
    config: &TrainConfig,
) -> Result<(AnomalyModel, TrainingLog)> {
    config.validate()?;
    if normals.is_empty() || anomalies.is_empty() {
        return Err(Error::invalid(
            "training needs at least one normal and one anomalous sample",
        ));
    }
    let dim = normals[0].as_ref().len();
    if dim == 0 {
        return Err(Error::invalid("embeddings must have at least one channel"));
    }
    for z in normals.iter().chain(anomalies) {
        let z = z.as_ref();
        if z.len() != dim {
            return Err(Error::Shape(format!(
                "embedding has {} dims, expected {dim}",
                z.len()
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "training embedding".into(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = init_model(dim, config, &mut rng);
    let mut params = model.params();
    let mut adam = Adam::new(params.len());

    let initial_loss = loss_unchecked(&model, normals, anomalies);
    let mut order: Vec<(bool, usize)> = (0..normals.len())
        .map(|i| (true, i))
        .chain((0..anomalies.len()).map(|i| (false, i)))
        .collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut batch_normals: Vec<&[f64]> = Vec::new();
            let mut batch_anomalies: Vec<&[f64]> = Vec::new();
            for &(is_normal, i) in batch {
                if is_normal {
                    batch_normals.push(normals[i].as_ref());
                } else {
                    batch_anomalies.push(anomalies[i].as_ref());
                }
            }
            let grads = gradient_unchecked(&model, &batch_normals, &batch_anomalies).flatten();
            adam.update(&mut params, &grads, config.learning_rate);
            model.set_params(&params)?;
        }
        let loss = loss_unchecked(&model, normals, anomalies);
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            let state = model.to_json().unwrap_or_else(|_| format!("{:?}", params));
            return Err(Error::Diverged { epoch, loss, state });
        }
        epoch_losses.push(loss);
    }
    Ok((
        model,
        TrainingLog {
            initial_loss,
            epoch_losses,
        },
    ))
}
