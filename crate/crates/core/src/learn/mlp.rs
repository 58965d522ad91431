//! A small fully-connected network over the six rule features: standardize,
//! two ReLU hidden layers, softmax over the three classes. Trained with
//! mini-batch Adam on the focal loss; every random choice flows from one
//! seeded generator, so identical inputs give bit-identical models.

use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{focal_loss, focal_loss_grad_logits, inverse_frequency_alpha};
use super::metrics::{self, EvalReport};
use super::{Class, Dataset, DegenerateDatasetError, require_all_classes, stratified_split};

pub const INPUT_DIM: usize = 6;
pub const OUTPUT_DIM: usize = 3;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// One affine layer; `weights[o][i]` maps input i to output o.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Layer {
            weights: vec![vec![0.0; in_dim]; out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    /// He-style uniform initialization: weights from
    /// U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.
    fn he_uniform(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let weights = (0..out_dim)
            .map(|_| (0..in_dim).map(|_| rng.gen_range(-limit..limit)).collect())
            .collect();
        Layer {
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }
}

/// Per-feature standardization fitted on the training split. Constant
/// features keep divisor 1 so they pass through centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Zero-variance columns noted at fit time (their divisor was forced
    /// to 1), so callers can warn that those features carry no signal.
    pub constant_features: Vec<usize>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Scaler {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
            constant_features: Vec::new(),
        }
    }

    /// Population mean and standard deviation per column; zero-variance
    /// columns get divisor 1 and are listed in `constant_features`.
    pub fn fit(rows: &[[f64; INPUT_DIM]]) -> Self {
        if rows.is_empty() {
            return Scaler::identity(INPUT_DIM);
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; INPUT_DIM];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x / n;
            }
        }
        let mut stds = vec![0.0; INPUT_DIM];
        for row in rows {
            for (s, (x, m)) in stds.iter_mut().zip(row.iter().zip(&means)) {
                *s += (x - m) * (x - m) / n;
            }
        }
        let mut constant_features = Vec::new();
        for (i, s) in stds.iter_mut().enumerate() {
            *s = s.sqrt();
            if *s == 0.0 {
                *s = 1.0;
                constant_features.push(i);
            }
        }
        Scaler {
            means,
            stds,
            constant_features,
        }
    }

    pub fn apply(&self, x: &[f64; INPUT_DIM]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Bookkeeping about how a model was produced, stored alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub split_ratio: f64,
    pub train_examples: usize,
    pub test_examples: usize,
}

impl Default for TrainingMeta {
    fn default() -> Self {
        TrainingMeta {
            seed: 0,
            epochs: 0,
            learning_rate: 0.0,
            batch_size: 0,
            split_ratio: 0.0,
            train_examples: 0,
            test_examples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Layer widths from input to output, e.g. [6, 32, 32, 3].
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub scaler: Scaler,
    /// Per-class focal-loss weights the model was trained with.
    pub alpha: [f64; 3],
    pub gamma: f64,
    pub meta: TrainingMeta,
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| v.max(0.0)).collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    /// activations[0] is the scaled input; the last entry is the softmax.
    activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer.
    zs: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Fresh network with He-uniform weights, identity scaler, and uniform
    /// class weights. `hidden` lists the hidden layer widths.
    pub fn new_random(hidden: &[usize], gamma: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer_sizes = vec![INPUT_DIM];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(OUTPUT_DIM);
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::he_uniform(w[1], w[0], rng))
            .collect();
        MlpModel {
            layer_sizes,
            layers,
            scaler: Scaler::identity(INPUT_DIM),
            alpha: [1.0; 3],
            gamma,
            meta: TrainingMeta::default(),
        }
    }

    fn forward(&self, x: &[f64; INPUT_DIM]) -> Trace {
        let mut activations = vec![self.scaler.apply(x)];
        let mut zs = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(activations.last().expect("nonempty"));
            let a = if i + 1 < self.layers.len() {
                relu(&z)
            } else {
                softmax(&z)
            };
            zs.push(z);
            activations.push(a);
        }
        Trace { activations, zs }
    }

    /// Class probabilities for one feature vector.
    pub fn probabilities(&self, x: &[f64; INPUT_DIM]) -> [f64; 3] {
        let trace = self.forward(x);
        let out = trace.activations.last().expect("nonempty");
        [out[0], out[1], out[2]]
    }

    /// Most probable class; ties break toward the lowest class index.
    pub fn predict(&self, x: &[f64; INPUT_DIM]) -> (Class, [f64; 3]) {
        let probs = self.probabilities(x);
        let mut best = 0;
        for k in 1..3 {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        (Class::from_index(best).expect("index in range"), probs)
    }

    /// Focal loss of this model on one example, under the model's own
    /// alpha and gamma.
    pub fn loss(&self, x: &[f64; INPUT_DIM], label: Class) -> f64 {
        let probs = self.probabilities(x);
        focal_loss(&probs, label.index(), &self.alpha, self.gamma).expect("shapes fixed at 3")
    }

    /// Loss gradient for one example, flattened in [`MlpModel::parameters`]
    /// order.
    pub fn loss_gradient(&self, x: &[f64; INPUT_DIM], label: Class) -> Vec<f64> {
        let trace = self.forward(x);
        let (_, grads) = self.backward(&trace, label);
        flatten(&grads)
    }

    /// Loss and per-layer gradients for one traced example.
    fn backward(&self, trace: &Trace, label: Class) -> (f64, Vec<Layer>) {
        let probs = trace.activations.last().expect("nonempty");
        let loss = focal_loss(probs, label.index(), &self.alpha, self.gamma)
            .expect("shapes fixed at 3");
        let mut delta =
            focal_loss_grad_logits(probs, label.index(), &self.alpha, self.gamma)
                .expect("shapes fixed at 3");
        let mut grads: Vec<Layer> = self
            .layers
            .iter()
            .map(|l| Layer::zeros(l.biases.len(), l.weights[0].len()))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let input = &trace.activations[l];
            for (o, d) in delta.iter().enumerate() {
                grads[l].biases[o] = *d;
                for (i, x) in input.iter().enumerate() {
                    grads[l].weights[o][i] = d * x;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; input.len()];
                for (o, d) in delta.iter().enumerate() {
                    for (i, p) in prev.iter_mut().enumerate() {
                        *p += self.layers[l].weights[o][i] * d;
                    }
                }
                // ReLU gate of the layer below.
                for (p, z) in prev.iter_mut().zip(&trace.zs[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        (loss, grads)
    }

    /// All parameters flattened: per layer, weight rows then biases.
    pub fn parameters(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() * l.weights[0].len() + l.biases.len())
            .sum()
    }

    /// Writes back a flat parameter vector in [`MlpModel::parameters`]
    /// order. Panics if the length does not match.
    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.parameter_count(), "parameter count");
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                for w in row {
                    *w = *it.next().expect("length checked");
                }
            }
            for b in &mut layer.biases {
                *b = *it.next().expect("length checked");
            }
        }
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in layers {
        for row in &layer.weights {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&layer.biases);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Fraction of each class routed to the training split.
    pub split_ratio: f64,
    pub gamma: f64,
    /// Per-class focal weights; `None` derives inverse-frequency weights
    /// from the training split.
    pub alpha: Option<[f64; 3]>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            hidden: vec![32, 32],
            learning_rate: 1e-3,
            batch_size: 32,
            split_ratio: 0.7,
            gamma: 2.0,
            alpha: None,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TrainError {
    #[error(transparent)]
    Degenerate(#[from] DegenerateDatasetError),
}

/// Adam moment estimates, one slot per flattened parameter.
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(count: usize, lr: f64) -> Self {
        Adam {
            m: vec![0.0; count],
            v: vec![0.0; count],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Trains a classifier on a stratified split of `ds` and scores it on the
/// held-out part. The whole procedure is a pure function of the dataset and
/// the config: the seed drives the split, the initialization, and every
/// epoch's batch order.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(MlpModel, EvalReport), TrainError> {
    require_all_classes(ds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_split, test_split) = stratified_split(ds, cfg.split_ratio, &mut rng);

    let feature_rows: Vec<[f64; INPUT_DIM]> =
        train_split.examples.iter().map(|e| e.features).collect();
    let mut model = MlpModel::new_random(&cfg.hidden, cfg.gamma, &mut rng);
    model.scaler = Scaler::fit(&feature_rows);
    model.alpha = cfg
        .alpha
        .unwrap_or_else(|| inverse_frequency_alpha(&train_split.class_counts()));
    model.meta = TrainingMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        split_ratio: cfg.split_ratio,
        train_examples: train_split.len(),
        test_examples: test_split.len(),
    };

    let mut params = model.parameters();
    let mut adam = Adam::new(params.len(), cfg.learning_rate);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let batch_size = cfg.batch_size.max(1);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad_sum = vec![0.0; params.len()];
            for &idx in batch {
                let example = &train_split.examples[idx];
                let trace = model.forward(&example.features);
                let (_, grads) = model.backward(&trace, example.label);
                for (acc, g) in grad_sum.iter_mut().zip(flatten(&grads)) {
                    *acc += g;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grad_sum {
                *g *= scale;
            }
            adam.step(&mut params, &grad_sum);
            model.set_parameters(&params);
        }
    }

    let report = metrics::evaluate(&model, &test_split);
    Ok((model, report))
}
