//! Full-batch training with early stopping, inference and checkpoints.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adjacency::Structure;
use super::model::{self, argmax, softmax_rows, Arch, Propagator, Weights};
use crate::error::{Error, Result};
use crate::graph::SplitMask;
use crate::rng;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_dim: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: 10,
            hidden_dim: 16,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid(
                "max_epochs, patience and hidden_dim must all be at least 1",
            ));
        }
        if !(self.learning_rate > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::invalid("learning_rate must be > 0 and weight_decay >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn best_val_accuracy(&self) -> f64 {
        self.val_accuracy.get(self.best_epoch).copied().unwrap_or(0.0)
    }

    pub fn best_train_accuracy(&self) -> f64 {
        self.train_accuracy.get(self.best_epoch).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub arch: Arch,
    pub weights: Weights,
    pub log: TrainingLog,
}

impl TrainedModel {
    pub fn hidden_dim(&self) -> usize {
        self.weights.w1.ncols()
    }

    pub fn feature_dim(&self) -> usize {
        match self.arch {
            Arch::Gcn => self.weights.w1.nrows(),
            Arch::Sage => self.weights.w1.nrows() / 2,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.w2.ncols()
    }
}

/// Glorot-uniform initialization; GraphSAGE halves are initialized separately.
pub fn init_weights(arch: Arch, features: usize, hidden: usize, classes: usize, seed: u64) -> Weights {
    let mut rng = rng::stream(seed, "init");
    let mut glorot = |rows: usize, cols: usize, fan_in: usize| {
        let limit = (6.0 / (fan_in + cols) as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
    };
    let [(r1, c1), (r2, c2)] = Weights::shapes(arch, features, hidden, classes);
    Weights {
        w1: glorot(r1, c1, features),
        w2: glorot(r2, c2, hidden),
    }
}

struct Adam {
    m: Weights,
    v: Weights,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(like: &Weights) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Weights, grads: &Weights, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (p, g, m, v) in [
            (&mut params.w1, &grads.w1, &mut self.m.w1, &mut self.v.w1),
            (&mut params.w2, &grads.w2, &mut self.m.w2, &mut self.v.w2),
        ] {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            });
        }
    }
}

/// Training objective: mean cross-entropy over the training nodes plus
/// `weight_decay / 2 · ‖W‖²`. Returns the loss, the weight gradients and the
/// forward pass it was computed from.
pub fn training_loss(
    prop: &Propagator,
    weights: &Weights,
    features: &CsrMatrix,
    labels: &[usize],
    train_nodes: &[usize],
    weight_decay: f64,
) -> Result<(f64, Weights, model::Forward)> {
    let fwd = model::forward(prop, weights, features)?;
    let (ce, d_logits) = model::cross_entropy(&fwd.logits, train_nodes, |i, t| t[labels[i]] = 1.0);
    let mut grads = model::backward(prop, weights, features, &fwd, &d_logits).weights;
    grads.w1.scaled_add(weight_decay, &weights.w1);
    grads.w2.scaled_add(weight_decay, &weights.w2);
    Ok((ce + 0.5 * weight_decay * weights.squared_norm(), grads, fwd))
}

fn accuracy(logits: &Array2<f64>, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes
        .iter()
        .filter(|&&i| argmax(logits.row(i)) == labels[i])
        .count();
    hits as f64 / nodes.len() as f64
}

/// Trains on a ready-made propagator. Validation accuracy is measured on the
/// weights of each epoch before their update; the best-validation weights
/// are returned (earliest epoch wins ties).
pub fn train_with_propagator(
    prop: &Propagator,
    features: &CsrMatrix,
    labels: &[usize],
    splits: &SplitMask,
    num_classes: usize,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch {
            context: "label count",
            expected: features.rows(),
            actual: labels.len(),
        });
    }
    let arch = prop.arch();
    let mut weights = init_weights(arch, features.cols(), config.hidden_dim, num_classes, config.seed);
    let mut adam = Adam::new(&weights);
    let mut log = TrainingLog::default();
    let mut best = weights.clone();
    let mut best_val = f64::NEG_INFINITY;
    let mut stale = 0;
    for epoch in 0..config.max_epochs {
        let (loss, grads, fwd) =
            training_loss(prop, &weights, features, labels, &splits.train, config.weight_decay)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "train_model",
                iteration: epoch,
            });
        }
        let val = accuracy(&fwd.logits, labels, &splits.val);
        log.train_loss.push(loss);
        log.train_accuracy.push(accuracy(&fwd.logits, labels, &splits.train));
        log.val_accuracy.push(val);
        if val > best_val {
            best_val = val;
            best.clone_from(&weights);
            log.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
        match config.optimizer {
            Optimizer::Adam => adam.step(&mut weights, &grads, config.learning_rate),
            Optimizer::Sgd => {
                weights.w1.scaled_add(-config.learning_rate, &grads.w1);
                weights.w2.scaled_add(-config.learning_rate, &grads.w2);
            }
        }
    }
    log::debug!(
        "trained {arch} for {} epochs, best val {:.4} at epoch {}",
        log.val_accuracy.len(),
        best_val,
        log.best_epoch
    );
    Ok(TrainedModel {
        arch,
        weights: best,
        log,
    })
}

pub fn train_model(
    structure: Structure<'_>,
    features: &CsrMatrix,
    labels: &[usize],
    splits: &SplitMask,
    num_classes: usize,
    arch: Arch,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let prop = Propagator::build(arch, structure)?;
    train_with_propagator(&prop, features, labels, splits, num_classes, config)
}

#[derive(Debug, Clone)]
pub struct Prediction {
    /// Softmax class probabilities, one row per node.
    pub scores: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Prediction {
    pub fn accuracy(&self, truth: &[usize], nodes: &[usize]) -> f64 {
        if nodes.is_empty() {
            return 0.0;
        }
        nodes.iter().filter(|&&i| self.labels[i] == truth[i]).count() as f64 / nodes.len() as f64
    }
}

fn check_model(model: &TrainedModel, prop: &Propagator) -> Result<()> {
    if model.arch != prop.arch() {
        return Err(Error::invalid(format!(
            "model is {} but propagator is {}",
            model.arch,
            prop.arch()
        )));
    }
    Ok(())
}

pub fn predict_with(model: &TrainedModel, prop: &Propagator, features: &CsrMatrix) -> Result<Prediction> {
    check_model(model, prop)?;
    let fwd = model::forward(prop, &model.weights, features)?;
    let scores = softmax_rows(&fwd.logits.view());
    let labels = scores.rows().into_iter().map(argmax).collect();
    Ok(Prediction { scores, labels })
}

pub fn predict(model: &TrainedModel, structure: Structure<'_>, features: &CsrMatrix) -> Result<Prediction> {
    predict_with(model, &Propagator::build(model.arch, structure)?, features)
}

/// First-layer post-activation output, one `H`-wide row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings(pub Array2<f64>);

impl Embeddings {
    pub fn num_nodes(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }
}

pub fn extract_embeddings_with(
    model: &TrainedModel,
    prop: &Propagator,
    features: &CsrMatrix,
) -> Result<Embeddings> {
    check_model(model, prop)?;
    Ok(Embeddings(model::forward(prop, &model.weights, features)?.hidden))
}

pub fn extract_embeddings(
    model: &TrainedModel,
    structure: Structure<'_>,
    features: &CsrMatrix,
) -> Result<Embeddings> {
    extract_embeddings_with(model, &Propagator::build(model.arch, structure)?, features)
}

/// JSON checkpoint layout (version 1):
///
/// ```text
/// {"format": "graphpub-model", "version": 1, "arch": "gcn" | "sage",
///  "feature_dim": F, "hidden_dim": H, "num_classes": C,
///  "w1": {"rows": r, "cols": c, "data": [row-major f64...]},
///  "w2": {...}}
/// ```
///
/// For `sage`, `w1` is `2F × H` and `w2` is `2H × C` with the self rows first.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    arch: Arch,
    feature_dim: usize,
    hidden_dim: usize,
    num_classes: usize,
    w1: MatrixRecord,
    w2: MatrixRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixRecord {
    fn from_array(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }

    fn into_array(self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data)
            .map_err(|e| Error::invalid(format!("checkpoint matrix shape: {e}")))
    }
}

const CHECKPOINT_FORMAT: &str = "graphpub-model";

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let record = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        arch: model.arch,
        feature_dim: model.feature_dim(),
        hidden_dim: model.hidden_dim(),
        num_classes: model.num_classes(),
        w1: MatrixRecord::from_array(&model.weights.w1),
        w2: MatrixRecord::from_array(&model.weights.w2),
    };
    let json = serde_json::to_string(&record).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let record: Checkpoint = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if record.format != CHECKPOINT_FORMAT || record.version != 1 {
        return Err(Error::invalid(format!(
            "unsupported checkpoint {} v{}",
            record.format, record.version
        )));
    }
    let weights = Weights {
        w1: record.w1.into_array()?,
        w2: record.w2.into_array()?,
    };
    let expected = Weights::shapes(record.arch, record.feature_dim, record.hidden_dim, record.num_classes);
    if [weights.w1.dim(), weights.w2.dim()] != expected {
        return Err(Error::invalid("checkpoint weight shapes disagree with header"));
    }
    Ok(TrainedModel {
        arch: record.arch,
        weights,
        log: TrainingLog::default(),
    })
}
