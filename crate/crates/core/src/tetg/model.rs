//! One-hidden-layer perceptron over class embeddings.
//!
//! `logit = w2 . relu(W1 z + b1) + b2`. A high logit means *normal*: the loss
//! pushes `sigmoid(logit)` to 1 on normal frames and to 0 on anomalous ones.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Optimizer and architecture settings for [`super::train`].
///
/// Defaults are classifier-scale: Adam at `lr = 1e-3`, constant schedule, 200
/// epochs, batch 64, hidden width 128. The multimodal fine-tune the classifier
/// sits next to used AdamW with cosine decay, `lr = 2e-5`, 1 epoch and batch 64;
/// those settings are not suitable for a randomly initialised MLP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 64,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyModel {
    input_dim: usize,
    hidden: usize,
    /// `hidden x input_dim`, row-major.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: f64,
    pub train_config: TrainConfig,
}

/// Gradients with the same layout as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.w1.len() + self.b1.len() + self.w2.len() + 1);
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }
}

impl AnomalyModel {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        assert!(input_dim > 0, "input_dim must be positive");
        Self {
            input_dim,
            hidden,
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
            train_config: TrainConfig {
                hidden,
                ..TrainConfig::default()
            },
        }
    }

    /// Builds a model from explicit parameters (`w1` is `hidden x input_dim`, row-major).
    pub fn from_parts(
        input_dim: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    ) -> Result<Self> {
        let hidden = b1.len();
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Shape(
                "input and hidden widths must be positive".into(),
            ));
        }
        if w1.len() != hidden * input_dim || w2.len() != hidden {
            return Err(Error::Shape(format!(
                "parameters do not match [{input_dim}, {hidden}, 1]: |W1|={} |w2|={}",
                w1.len(),
                w2.len()
            )));
        }
        let model = Self {
            input_dim,
            hidden,
            w1,
            b1,
            w2,
            b2,
            train_config: TrainConfig {
                hidden,
                ..TrainConfig::default()
            },
        };
        model.check_finite()?;
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn layer_dims(&self) -> [usize; 3] {
        [self.input_dim, self.hidden, 1]
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened in the order `W1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        Gradients {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2,
        }
        .flatten()
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        if self.params().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                what: "model parameters".into(),
            })
        }
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} dims, model expects {}",
                z.len(),
                self.input_dim
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "classifier input".into(),
            });
        }
        Ok(())
    }

    fn pre_activations(&self, z: &[f64]) -> Vec<f64> {
        self.w1
            .chunks_exact(self.input_dim)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub(crate) fn logit_unchecked(&self, z: &[f64]) -> f64 {
        self.pre_activations(z)
            .iter()
            .zip(&self.w2)
            .map(|(a, w)| w * a.max(0.0))
            .sum::<f64>()
            + self.b2
    }

    /// Raw classifier output for one class embedding.
    pub fn forward(&self, z: &[f64]) -> Result<f64> {
        self.check_input(z)?;
        Ok(self.logit_unchecked(z))
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            layer_dims: self.layer_dims().to_vec(),
            weights: vec![
                self.w1
                    .chunks_exact(self.input_dim)
                    .map(<[f64]>::to_vec)
                    .collect(),
                vec![self.w2.clone()],
            ],
            biases: vec![self.b1.clone(), vec![self.b2]],
            activation: "relu".into(),
            train_config: self.train_config.clone(),
            seed: self.train_config.seed,
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        if file.activation != "relu" {
            return Err(Error::invalid(format!(
                "unsupported activation {:?}",
                file.activation
            )));
        }
        let [c, h, o] = <[usize; 3]>::try_from(file.layer_dims.as_slice()).map_err(|_| {
            Error::Shape(format!(
                "layer_dims must have 3 entries, got {:?}",
                file.layer_dims
            ))
        })?;
        if o != 1 || file.weights.len() != 2 || file.biases.len() != 2 {
            return Err(Error::Shape(
                "expected two layers with a single output".into(),
            ));
        }
        let w1_rows = &file.weights[0];
        if w1_rows.len() != h || w1_rows.iter().any(|r| r.len() != c) {
            return Err(Error::Shape(format!("first weight matrix is not {h}x{c}")));
        }
        if file.weights[1].len() != 1 || file.biases[1].len() != 1 {
            return Err(Error::Shape(
                "output layer must have exactly one unit".into(),
            ));
        }
        let mut model = Self::from_parts(
            c,
            w1_rows.concat(),
            file.biases[0].clone(),
            file.weights[1][0].clone(),
            file.biases[1][0],
        )?;
        if model.hidden != h {
            return Err(Error::Shape(format!(
                "hidden bias has {} entries, expected {h}",
                model.hidden
            )));
        }
        model.train_config = file.train_config;
        model.train_config.seed = file.seed;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::json("model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text).map_err(|e| Error::json("model", e))?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: String,
    pub train_config: TrainConfig,
    pub seed: u64,
}

/// `-ln(sigmoid(x))` without overflow.
pub(crate) fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_batch<S: AsRef<[f64]>>(
    model: &AnomalyModel,
    normals: &[S],
    anomalies: &[S],
) -> Result<()> {
    if normals.is_empty() && anomalies.is_empty() {
        return Err(Error::invalid("loss needs at least one sample"));
    }
    for z in normals.iter().chain(anomalies) {
        model.check_input(z.as_ref())?;
    }
    Ok(())
}

/// Mean of `-ln sigmoid(logit)` over normals plus mean of `-ln(1 - sigmoid(logit))` over anomalies.
///
/// An empty class contributes nothing.
pub fn bce_loss<S: AsRef<[f64]>>(
    model: &AnomalyModel,
    normals: &[S],
    anomalies: &[S],
) -> Result<f64> {
    check_batch(model, normals, anomalies)?;
    Ok(loss_unchecked(model, normals, anomalies))
}

pub(crate) fn loss_unchecked<S: AsRef<[f64]>>(
    model: &AnomalyModel,
    normals: &[S],
    anomalies: &[S],
) -> f64 {
    let mean = |xs: &[S], f: &dyn Fn(f64) -> f64| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter()
                .map(|z| f(model.logit_unchecked(z.as_ref())))
                .sum::<f64>()
                / xs.len() as f64
        }
    };
    mean(normals, &neg_log_sigmoid) + mean(anomalies, &|x| neg_log_sigmoid(-x))
}

/// Analytic gradient of [`bce_loss`] with respect to every parameter.
pub fn gradient<S: AsRef<[f64]>>(
    model: &AnomalyModel,
    normals: &[S],
    anomalies: &[S],
) -> Result<Gradients> {
    check_batch(model, normals, anomalies)?;
    Ok(gradient_unchecked(model, normals, anomalies))
}

pub(crate) fn gradient_unchecked<S: AsRef<[f64]>>(
    model: &AnomalyModel,
    normals: &[S],
    anomalies: &[S],
) -> Gradients {
    let (c, h) = (model.input_dim, model.hidden);
    let mut g = Gradients {
        w1: vec![0.0; h * c],
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
    };

    // d(-ln s(x))/dx = s(x) - 1 ; d(-ln(1 - s(x)))/dx = s(x)
    let groups: [(&[S], f64); 2] = [(normals, -1.0), (anomalies, 0.0)];
    for (samples, offset) in groups {
        if samples.is_empty() {
            continue;
        }
        let inv = 1.0 / samples.len() as f64;
        for z in samples {
            let z = z.as_ref();
            let pre = model.pre_activations(z);
            let hidden: Vec<f64> = pre.iter().map(|a| a.max(0.0)).collect();
            let logit = hidden
                .iter()
                .zip(&model.w2)
                .map(|(a, w)| a * w)
                .sum::<f64>()
                + model.b2;
            let dlogit = (sigmoid(logit) + offset) * inv;

            g.b2 += dlogit;
            for j in 0..h {
                g.w2[j] += dlogit * hidden[j];
                if pre[j] > 0.0 {
                    let dpre = dlogit * model.w2[j];
                    g.b1[j] += dpre;
                    for (gw, x) in g.w1[j * c..(j + 1) * c].iter_mut().zip(z) {
                        *gw += dpre * x;
                    }
                }
            }
        }
    }
    g
}
