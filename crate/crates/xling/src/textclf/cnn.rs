//! The convolutional sentence classifier: widths {2,3,4} of 1-d filters
//! over the token-embedding matrix, ReLU, max-over-time pooling, inverted
//! dropout and a dense layer to two class scores. Embeddings are inputs,
//! never parameters: no gradient ever flows to them.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::Matrix;

use super::{Label, TextClfError};

pub const FILTER_WIDTHS: [usize; 3] = [2, 3, 4];
pub const DEFAULT_FILTERS_PER_WIDTH: usize = 256;
pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    dim: usize,
    filters_per_width: usize,
    dropout_rate: f64,
    /// Per width: filters_per_width rows of width·dim weights.
    conv_weights: Vec<Matrix>,
    conv_bias: Vec<Vec<f64>>,
    /// 2 × (widths · filters_per_width).
    dense_weights: Matrix,
    dense_bias: Vec<f64>,
}

impl CnnModel {
    /// Fresh model with uniform(−a, a) weights, a = sqrt(6/(fan_in+fan_out))
    /// per tensor, and zero biases.
    pub fn new(dim: usize, filters_per_width: usize, dropout_rate: f64, seed: u64) -> CnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut conv_weights = Vec::new();
        let mut conv_bias = Vec::new();
        for width in FILTER_WIDTHS {
            let fan_in = width * dim;
            let a = (6.0 / (fan_in + filters_per_width) as f64).sqrt();
            conv_weights.push(Matrix::from_fn(filters_per_width, fan_in, |_, _| {
                rng.random_range(-a..a)
            }));
            conv_bias.push(vec![0.0; filters_per_width]);
        }
        let total = FILTER_WIDTHS.len() * filters_per_width;
        let a = (6.0 / (total + 2) as f64).sqrt();
        let dense_weights = Matrix::from_fn(2, total, |_, _| rng.random_range(-a..a));
        CnnModel {
            dim,
            filters_per_width,
            dropout_rate,
            conv_weights,
            conv_bias,
            dense_weights,
            dense_bias: vec![0.0; 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn filters_per_width(&self) -> usize {
        self.filters_per_width
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn total_filters(&self) -> usize {
        FILTER_WIDTHS.len() * self.filters_per_width
    }

    pub(super) fn from_tensors(
        dim: usize,
        filters_per_width: usize,
        dropout_rate: f64,
        conv_weights: Vec<Matrix>,
        conv_bias: Vec<Vec<f64>>,
        dense_weights: Matrix,
        dense_bias: Vec<f64>,
    ) -> CnnModel {
        CnnModel {
            dim,
            filters_per_width,
            dropout_rate,
            conv_weights,
            conv_bias,
            dense_weights,
            dense_bias,
        }
    }

    /// Parameter tensors in a fixed order (conv weights/biases by width,
    /// then the dense layer); the optimizer and checkpoints rely on it.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = Vec::new();
        for w in &self.conv_weights {
            t.push(w.as_slice());
        }
        for b in &self.conv_bias {
            t.push(b.as_slice());
        }
        t.push(self.dense_weights.as_slice());
        t.push(self.dense_bias.as_slice());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = Vec::new();
        for w in &mut self.conv_weights {
            t.push(w.as_mut_slice());
        }
        for b in &mut self.conv_bias {
            t.push(b.as_mut_slice());
        }
        t.push(self.dense_weights.as_mut_slice());
        t.push(self.dense_bias.as_mut_slice());
        t
    }

    pub(super) fn conv_weights(&self) -> &[Matrix] {
        &self.conv_weights
    }

    pub(super) fn conv_bias(&self) -> &[Vec<f64>] {
        &self.conv_bias
    }

    pub(super) fn dense_weights(&self) -> &Matrix {
        &self.dense_weights
    }

    pub(super) fn dense_bias(&self) -> &[f64] {
        &self.dense_bias
    }
}

/// Gradient tensors mirroring [`CnnModel::tensors`].
#[derive(Debug, Clone)]
pub struct Gradients {
    conv_weights: Vec<Matrix>,
    conv_bias: Vec<Vec<f64>>,
    dense_weights: Matrix,
    dense_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &CnnModel) -> Gradients {
        Gradients {
            conv_weights: model
                .conv_weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            conv_bias: model.conv_bias.iter().map(|b| vec![0.0; b.len()]).collect(),
            dense_weights: Matrix::zeros(
                model.dense_weights.rows(),
                model.dense_weights.cols(),
            ),
            dense_bias: vec![0.0; 2],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = Vec::new();
        for w in &self.conv_weights {
            t.push(w.as_slice());
        }
        for b in &self.conv_bias {
            t.push(b.as_slice());
        }
        t.push(self.dense_weights.as_slice());
        t.push(self.dense_bias.as_slice());
        t
    }
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Max-over-time output per filter, after ReLU, before dropout.
    pooled: Vec<f64>,
    /// Post-dropout activations fed to the dense layer.
    dropped: Vec<f64>,
    /// Inverted-dropout factors (0 or 1/keep); all-ones in eval mode.
    mask: Vec<f64>,
    /// Winning time position per filter; None when the filter never fired.
    argmax: Vec<Option<usize>>,
}

impl Cache {
    pub fn pooled(&self) -> &[f64] {
        &self.pooled
    }

    pub fn dropped(&self) -> &[f64] {
        &self.dropped
    }

    pub fn mask(&self) -> &[f64] {
        &self.mask
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub scores: [f64; 2],
    pub prediction: Label,
    pub cache: Cache,
}

/// Runs the network on an n×d token-embedding matrix. Inputs shorter than
/// a filter width are zero-padded at the end to that width. In train mode
/// the pooled vector passes through a seeded inverted-dropout mask.
pub fn forward(
    model: &CnnModel,
    input: &Matrix,
    train_mode: bool,
    dropout_seed: u64,
) -> Result<Forward, TextClfError> {
    if input.cols() != model.dim {
        return Err(TextClfError::DimensionMismatch {
            model_dim: model.dim,
            space_dim: input.cols(),
        });
    }
    assert!(input.rows() >= 1, "forward requires at least one token row");

    let n = input.rows();
    let d = model.dim;
    let total = model.total_filters();
    let mut pooled = vec![0.0; total];
    let mut argmax = vec![None; total];

    for (w_idx, &width) in FILTER_WIDTHS.iter().enumerate() {
        let weights = &model.conv_weights[w_idx];
        let bias = &model.conv_bias[w_idx];
        let positions = if n >= width { n - width + 1 } else { 1 };
        // Padded tail window, built once when the input is short.
        let padded: Option<Vec<f64>> = (n < width).then(|| {
            let mut buf = vec![0.0; width * d];
            buf[..n * d].copy_from_slice(input.as_slice());
            buf
        });
        for f in 0..model.filters_per_width {
            let w_row = weights.row(f);
            let mut best = f64::NEG_INFINITY;
            let mut best_pos = 0usize;
            for p in 0..positions {
                let window: &[f64] = match &padded {
                    Some(buf) => buf,
                    None => &input.as_slice()[p * d..(p + width) * d],
                };
                let value = bias[f] + dot(w_row, window);
                if value > best {
                    best = value;
                    best_pos = p;
                }
            }
            let idx = w_idx * model.filters_per_width + f;
            if best > 0.0 {
                pooled[idx] = best;
                argmax[idx] = Some(best_pos);
            }
        }
    }

    let keep = 1.0 - model.dropout_rate;
    let mask: Vec<f64> = if train_mode {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        (0..total)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect()
    } else {
        vec![1.0; total]
    };
    let dropped: Vec<f64> = pooled.iter().zip(&mask).map(|(p, m)| p * m).collect();

    let mut scores = [0.0f64; 2];
    for (c, score) in scores.iter_mut().enumerate() {
        *score = model.dense_bias[c] + dot(model.dense_weights.row(c), &dropped);
    }
    let prediction = if scores[1] > scores[0] {
        Label::Negative
    } else {
        Label::Positive
    };

    Ok(Forward {
        scores,
        prediction,
        cache: Cache {
            pooled,
            dropped,
            mask,
            argmax,
        },
    })
}

/// Mean softmax cross-entropy over the batch with exact analytic gradients
/// for every trainable tensor. Dropout masks are derived per example from
/// `dropout_seed`, so the same seed reproduces the same loss and gradients.
pub fn loss_and_grads(
    model: &CnnModel,
    batch: &[Matrix],
    labels: &[Label],
    dropout_seed: u64,
) -> Result<(f64, Gradients), TextClfError> {
    assert_eq!(batch.len(), labels.len(), "one label per example");
    assert!(!batch.is_empty(), "batch must be non-empty");

    let scale = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(model);
    let mut loss = 0.0;
    for (e, (input, &label)) in batch.iter().zip(labels).enumerate() {
        let example_seed = per_example_seed(dropout_seed, e);
        let fwd = forward(model, input, true, example_seed)?;
        let probs = softmax2(fwd.scores);
        loss -= probs[label.index()].ln() * scale;

        let mut delta = [probs[0] * scale, probs[1] * scale];
        delta[label.index()] -= scale;
        backward(model, input, &fwd.cache, delta, &mut grads);
    }
    if !loss.is_finite() {
        return Err(TextClfError::NonFiniteLoss { epoch: 0 });
    }
    Ok((loss, grads))
}

pub(super) fn per_example_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(super) fn softmax2(scores: [f64; 2]) -> [f64; 2] {
    let m = scores[0].max(scores[1]);
    let e0 = (scores[0] - m).exp();
    let e1 = (scores[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

fn backward(
    model: &CnnModel,
    input: &Matrix,
    cache: &Cache,
    delta: [f64; 2],
    grads: &mut Gradients,
) {
    let total = model.total_filters();
    let n = input.rows();
    let d = model.dim;

    let mut d_dropped = vec![0.0; total];
    for c in 0..2 {
        grads.dense_bias[c] += delta[c];
        let w_row = model.dense_weights.row(c);
        let g_row = grads.dense_weights.row_mut(c);
        for j in 0..total {
            g_row[j] += delta[c] * cache.dropped[j];
            d_dropped[j] += delta[c] * w_row[j];
        }
    }

    for (w_idx, &width) in FILTER_WIDTHS.iter().enumerate() {
        for f in 0..model.filters_per_width {
            let idx = w_idx * model.filters_per_width + f;
            let Some(p) = cache.argmax[idx] else {
                continue;
            };
            // Dropout factor folds into the chain; masked filters get zero.
            let g = d_dropped[idx] * cache.mask[idx];
            if g == 0.0 {
                continue;
            }
            grads.conv_bias[w_idx][f] += g;
            let g_row = grads.conv_weights[w_idx].row_mut(f);
            for t in 0..width {
                if p + t >= n {
                    break;
                }
                let in_row = input.row(p + t);
                for j in 0..d {
                    g_row[t * d + j] += g * in_row[j];
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
