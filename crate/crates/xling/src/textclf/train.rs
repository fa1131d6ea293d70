//! Training and evaluation: Adam over shuffled minibatches with a
//! best-on-dev parameter snapshot, accuracy/macro-F1 scoring, and the
//! mean-embedding logistic baseline.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingSpace;
use crate::numerics::Matrix;

use super::adam::Adam;
use super::cnn::{forward, loss_and_grads, per_example_seed, softmax2, CnnModel};
use super::{tokenize, Label, LabeledDataset, LrSchedule, TextClfError, TrainConfig};

/// Tokenized examples resolved against a vocabulary: one row index per
/// token (None for OOV), with empty-token examples excluded and counted.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    items: Vec<Vec<Option<u32>>>,
    labels: Vec<Label>,
    pub excluded: usize,
}

impl PreparedDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn prepare(ds: &LabeledDataset, space: &EmbeddingSpace) -> PreparedDataset {
    let mut items = Vec::with_capacity(ds.len());
    let mut labels = Vec::with_capacity(ds.len());
    let mut excluded = 0usize;
    for (text, label) in &ds.examples {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            excluded += 1;
            continue;
        }
        items.push(
            tokens
                .iter()
                .map(|t| space.index_of(t).map(|i| i as u32))
                .collect(),
        );
        labels.push(*label);
    }
    PreparedDataset {
        items,
        labels,
        excluded,
    }
}

fn embed_item(space: &EmbeddingSpace, item: &[Option<u32>]) -> Matrix {
    let d = space.dim();
    let mut m = Matrix::zeros(item.len(), d);
    for (i, idx) in item.iter().enumerate() {
        if let Some(idx) = idx {
            m.row_mut(i).copy_from_slice(space.row(*idx as usize));
        }
    }
    m
}

fn scheduled_lr(cfg: &TrainConfig, step: usize, total_steps: usize) -> f64 {
    match cfg.lr_schedule {
        LrSchedule::Constant => cfg.learning_rate,
        LrSchedule::LinearDecay => {
            cfg.learning_rate * (1.0 - step as f64 / total_steps as f64)
        }
    }
}

/// Per-epoch train loss and dev accuracy, plus which epoch's snapshot was
/// returned.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub dev_accuracy: Vec<f64>,
    pub best_epoch: usize,
}

/// Trains the CNN with Adam over seeded shuffled minibatches and returns
/// the parameter snapshot with the best dev accuracy (earliest on ties).
/// The embedding space is read-only throughout: embeddings stay frozen.
pub fn train(
    model: CnnModel,
    train_ds: &LabeledDataset,
    dev_ds: &LabeledDataset,
    space: &EmbeddingSpace,
    cfg: &TrainConfig,
) -> Result<(CnnModel, TrainHistory), TextClfError> {
    cfg.validate()?;
    if model.dim() != space.dim() {
        return Err(TextClfError::DimensionMismatch {
            model_dim: model.dim(),
            space_dim: space.dim(),
        });
    }
    let prepared_train = prepare(train_ds, space);
    let prepared_dev = prepare(dev_ds, space);
    if prepared_train.is_empty() {
        return Err(TextClfError::EmptyDataset { split: "train" });
    }
    if prepared_dev.is_empty() {
        return Err(TextClfError::EmptyDataset { split: "dev" });
    }

    let mut model = model;
    let sizes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(cfg.beta1, cfg.beta2, cfg.epsilon, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = prepared_train.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.max_epochs * batches_per_epoch;
    let mut step = 0usize;

    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.max_epochs),
        dev_accuracy: Vec::with_capacity(cfg.max_epochs),
        best_epoch: 0,
    };
    let mut best: Option<(f64, CnnModel)> = None;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Matrix> = chunk
                .iter()
                .map(|&i| embed_item(space, &prepared_train.items[i]))
                .collect();
            let labels: Vec<Label> = chunk.iter().map(|&i| prepared_train.labels[i]).collect();
            let lr = scheduled_lr(cfg, step, total_steps);
            let step_seed = per_example_seed(cfg.seed, step);
            let (loss, grads) = loss_and_grads(&model, &batch, &labels, step_seed)
                .map_err(|e| match e {
                    TextClfError::NonFiniteLoss { .. } => TextClfError::NonFiniteLoss { epoch },
                    other => other,
                })?;
            adam.step(model.tensors_mut(), grads.tensors(), lr);
            loss_sum += loss * chunk.len() as f64;
            step += 1;
        }

        let dev_accuracy = cnn_accuracy(&model, &prepared_dev, space)?;
        history.train_loss.push(loss_sum / n as f64);
        history.dev_accuracy.push(dev_accuracy);
        if best.as_ref().is_none_or(|(acc, _)| dev_accuracy > *acc) {
            best = Some((dev_accuracy, model.clone()));
            history.best_epoch = epoch;
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

fn cnn_accuracy(
    model: &CnnModel,
    prepared: &PreparedDataset,
    space: &EmbeddingSpace,
) -> Result<f64, TextClfError> {
    let mut correct = 0usize;
    for (item, &label) in prepared.items.iter().zip(&prepared.labels) {
        let input = embed_item(space, item);
        let fwd = forward(model, &input, false, 0)?;
        if fwd.prediction == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / prepared.len() as f64)
}

/// Logistic (two-class softmax) model over the mean of the token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanModel {
    weights: Matrix,
    bias: Vec<f64>,
}

impl MeanModel {
    pub fn new(dim: usize, seed: u64) -> MeanModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = (6.0 / (dim + 2) as f64).sqrt();
        MeanModel {
            weights: Matrix::from_fn(2, dim, |_, _| rng.random_range(-a..a)),
            bias: vec![0.0; 2],
        }
    }

    pub(super) fn from_tensors(weights: Matrix, bias: Vec<f64>) -> MeanModel {
        MeanModel { weights, bias }
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub(super) fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub(super) fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn scores(&self, feature: &[f64]) -> [f64; 2] {
        let mut s = [0.0; 2];
        for (c, out) in s.iter_mut().enumerate() {
            *out = self.bias[c]
                + self
                    .weights
                    .row(c)
                    .iter()
                    .zip(feature)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
        }
        s
    }
}

fn mean_feature(space: &EmbeddingSpace, item: &[Option<u32>]) -> Vec<f64> {
    let d = space.dim();
    let mut feature = vec![0.0; d];
    for idx in item {
        if let Some(idx) = idx {
            for (f, v) in feature.iter_mut().zip(space.row(*idx as usize)) {
                *f += v;
            }
        }
    }
    let n = item.len() as f64;
    for f in &mut feature {
        *f /= n;
    }
    feature
}

/// Trains the mean-embedding baseline with the same Adam regime and
/// best-on-dev selection as the CNN. Texts whose mean embedding is the
/// zero vector (all tokens OOV) are excluded.
pub fn fit_mean_baseline(
    train_ds: &LabeledDataset,
    dev_ds: &LabeledDataset,
    space: &EmbeddingSpace,
    cfg: &TrainConfig,
) -> Result<(MeanModel, TrainHistory), TextClfError> {
    cfg.validate()?;
    let collect = |ds: &LabeledDataset| {
        let prepared = prepare(ds, space);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (item, &label) in prepared.items.iter().zip(&prepared.labels) {
            let feature = mean_feature(space, item);
            if feature.iter().all(|&v| v == 0.0) {
                continue;
            }
            features.push(feature);
            labels.push(label);
        }
        (features, labels)
    };
    let (train_x, train_y) = collect(train_ds);
    let (dev_x, dev_y) = collect(dev_ds);
    if train_x.is_empty() {
        return Err(TextClfError::EmptyDataset { split: "train" });
    }
    if dev_x.is_empty() {
        return Err(TextClfError::EmptyDataset { split: "dev" });
    }

    let mut model = MeanModel::new(space.dim(), cfg.seed);
    let d = space.dim();
    let mut adam = Adam::new(cfg.beta1, cfg.beta2, cfg.epsilon, &[2 * d, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = train_x.len();
    let total_steps = cfg.max_epochs * n.div_ceil(cfg.batch_size);
    let mut step = 0usize;
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        dev_accuracy: Vec::new(),
        best_epoch: 0,
    };
    let mut best: Option<(f64, MeanModel)> = None;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grad_w = Matrix::zeros(2, d);
            let mut grad_b = vec![0.0; 2];
            let mut loss = 0.0;
            for &i in chunk {
                let probs = softmax2(model.scores(&train_x[i]));
                loss -= probs[train_y[i].index()].ln() * scale;
                let mut delta = [probs[0] * scale, probs[1] * scale];
                delta[train_y[i].index()] -= scale;
                for c in 0..2 {
                    grad_b[c] += delta[c];
                    let row = grad_w.row_mut(c);
                    for (g, x) in row.iter_mut().zip(&train_x[i]) {
                        *g += delta[c] * x;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(TextClfError::NonFiniteLoss { epoch });
            }
            let lr = scheduled_lr(cfg, step, total_steps);
            adam.step(
                vec![model.weights.as_mut_slice(), model.bias.as_mut_slice()],
                vec![grad_w.as_slice(), grad_b.as_slice()],
                lr,
            );
            loss_sum += loss * chunk.len() as f64;
            step += 1;
        }

        let mut correct = 0usize;
        for (x, &y) in dev_x.iter().zip(&dev_y) {
            let scores = model.scores(x);
            let pred = if scores[1] > scores[0] {
                Label::Negative
            } else {
                Label::Positive
            };
            if pred == y {
                correct += 1;
            }
        }
        let dev_accuracy = correct as f64 / dev_x.len() as f64;
        history.train_loss.push(loss_sum / n as f64);
        history.dev_accuracy.push(dev_accuracy);
        if best.as_ref().is_none_or(|(acc, _)| dev_accuracy > *acc) {
            best = Some((dev_accuracy, model.clone()));
            history.best_epoch = epoch;
        }
    }

    let (_, best_model) = best.expect("at least one epoch ran");
    Ok((best_model, history))
}

/// A trained classifier of either kind, with a common prediction surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Cnn(CnnModel),
    Mean(MeanModel),
}

impl Classifier {
    pub fn dim(&self) -> usize {
        match self {
            Classifier::Cnn(m) => m.dim(),
            Classifier::Mean(m) => m.dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Classifier::Cnn(_) => "cnn",
            Classifier::Mean(_) => "mean_baseline",
        }
    }

    fn scores_for_item(
        &self,
        space: &EmbeddingSpace,
        item: &[Option<u32>],
    ) -> Result<[f64; 2], TextClfError> {
        match self {
            Classifier::Cnn(model) => {
                let input = embed_item(space, item);
                Ok(forward(model, &input, false, 0)?.scores)
            }
            Classifier::Mean(model) => Ok(model.scores(&mean_feature(space, item))),
        }
    }

    /// Tokenizes and classifies one text. Empty-token texts are scored from
    /// a single zero row so every input line still gets a prediction.
    pub fn predict_text(
        &self,
        text: &str,
        space: &EmbeddingSpace,
    ) -> Result<(Label, [f64; 2]), TextClfError> {
        if self.dim() != space.dim() {
            return Err(TextClfError::DimensionMismatch {
                model_dim: self.dim(),
                space_dim: space.dim(),
            });
        }
        let tokens = tokenize(text);
        let item: Vec<Option<u32>> = if tokens.is_empty() {
            vec![None]
        } else {
            tokens
                .iter()
                .map(|t| space.index_of(t).map(|i| i as u32))
                .collect()
        };
        let scores = self.scores_for_item(space, &item)?;
        let probs = softmax2(scores);
        let label = if scores[1] > scores[0] {
            Label::Negative
        } else {
            Label::Positive
        };
        Ok((label, probs))
    }
}

/// Accuracy, macro-F1 and the 2×2 confusion matrix (rows true, columns
/// predicted). Empty-token examples are excluded and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: [[usize; 2]; 2],
    pub evaluated: usize,
    pub excluded: usize,
}

pub fn evaluate(
    clf: &Classifier,
    ds: &LabeledDataset,
    space: &EmbeddingSpace,
) -> Result<EvalReport, TextClfError> {
    if clf.dim() != space.dim() {
        return Err(TextClfError::DimensionMismatch {
            model_dim: clf.dim(),
            space_dim: space.dim(),
        });
    }
    let prepared = prepare(ds, space);
    if prepared.is_empty() {
        return Err(TextClfError::EmptyDataset { split: "eval" });
    }
    let mut confusion = [[0usize; 2]; 2];
    for (item, &label) in prepared.items.iter().zip(&prepared.labels) {
        let scores = clf.scores_for_item(space, item)?;
        let pred = if scores[1] > scores[0] { 1 } else { 0 };
        confusion[label.index()][pred] += 1;
    }
    let evaluated = prepared.len();
    let correct = confusion[0][0] + confusion[1][1];
    Ok(EvalReport {
        accuracy: correct as f64 / evaluated as f64,
        macro_f1: macro_f1(&confusion),
        confusion,
        evaluated,
        excluded: prepared.excluded,
    })
}

fn macro_f1(confusion: &[[usize; 2]; 2]) -> f64 {
    let mut sum = 0.0;
    for class in 0..2 {
        let tp = confusion[class][class] as f64;
        let fp = confusion[1 - class][class] as f64;
        let fn_ = confusion[class][1 - class] as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    sum / 2.0
}
