//! Binary sentiment classification over frozen word embeddings: a
//! convolutional sentence classifier trained with Adam, plus a fast
//! mean-embedding logistic baseline, tokenization, TSV dataset handling
//! and accuracy / macro-F1 metrics.

mod adam;
mod checkpoint;
mod cnn;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use cnn::{
    forward, loss_and_grads, CnnModel, Forward, Gradients, DEFAULT_DROPOUT,
    DEFAULT_FILTERS_PER_WIDTH, FILTER_WIDTHS,
};
pub use train::{
    evaluate, fit_mean_baseline, prepare, train, Classifier, EvalReport, MeanModel,
    PreparedDataset, TrainHistory,
};

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::embeddings::EmbeddingSpace;
use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum TextClfError {
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{path}:{line}: expected \"<label><TAB><text>\"")]
    MissingTab { path: PathBuf, line: usize },
    #[error("{path}:{line}: bad label {label:?} (expected \"positive\" or \"negative\")")]
    BadLabel {
        path: PathBuf,
        line: usize,
        label: String,
    },
    #[error("dataset {split} is empty after exclusions")]
    EmptyDataset { split: &'static str },
    #[error("example has no tokens")]
    EmptyExample,
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    NonFiniteLoss { epoch: usize },
    #[error("model dimension {model_dim} does not match embedding dimension {space_dim}")]
    DimensionMismatch { model_dim: usize, space_dim: usize },
    #[error("{path}:{line}: bad checkpoint: {detail}")]
    Checkpoint {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("invalid train config: {reason}")]
    InvalidConfig { reason: String },
}

/// Polarity label. Positive is class index 0; argmax ties resolve to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Positive => 0,
            Label::Negative => 1,
        }
    }

    pub fn from_index(index: usize) -> Label {
        if index == 0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(format!("bad label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Dev,
    Test,
}

/// Labeled polarity examples from one dataset split.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub examples: Vec<(String, Label)>,
    pub split_tag: SplitTag,
}

impl LabeledDataset {
    pub fn new(examples: Vec<(String, Label)>, split_tag: SplitTag) -> Self {
        LabeledDataset {
            examples,
            split_tag,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Loads a "label<TAB>text" TSV; labels are exactly "positive"/"negative".
pub fn load_dataset(
    path: impl AsRef<Path>,
    split_tag: SplitTag,
) -> Result<LabeledDataset, TextClfError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| TextClfError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    let mut examples = Vec::new();
    for (offset, line) in content.lines().enumerate() {
        let line_no = offset + 1;
        if line.is_empty() {
            continue;
        }
        let Some((label, text)) = line.split_once('\t') else {
            return Err(TextClfError::MissingTab {
                path: path.to_path_buf(),
                line: line_no,
            });
        };
        let label: Label = label.parse().map_err(|_| TextClfError::BadLabel {
            path: path.to_path_buf(),
            line: line_no,
            label: label.to_string(),
        })?;
        examples.push((text.to_string(), label));
    }
    Ok(LabeledDataset::new(examples, split_tag))
}

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<(), TextClfError> {
    let path = path.as_ref();
    let io_err = |source| TextClfError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = io::BufWriter::new(file);
    for (text, label) in &ds.examples {
        writeln!(out, "{label}\t{text}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Lowercases, splits on Unicode whitespace, and strips leading/trailing
/// non-alphanumeric characters from each token. No length truncation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|tok| !tok.is_empty())
        .map(str::to_string)
        .collect()
}

/// One embedding row per token (OOV rows are zero). Errors on an empty
/// token list, which marks the example as excluded.
pub fn embed_sequence(
    tokens: &[String],
    space: &EmbeddingSpace,
) -> Result<Matrix, TextClfError> {
    if tokens.is_empty() {
        return Err(TextClfError::EmptyExample);
    }
    let d = space.dim();
    let mut m = Matrix::zeros(tokens.len(), d);
    for (i, token) in tokens.iter().enumerate() {
        if let Some(idx) = space.index_of(token) {
            m.row_mut(i).copy_from_slice(space.row(idx));
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    LinearDecay,
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LrSchedule::Constant => "constant",
            LrSchedule::LinearDecay => "linear_decay",
        })
    }
}

impl FromStr for LrSchedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(LrSchedule::Constant),
            "linear_decay" => Ok(LrSchedule::LinearDecay),
            other => Err(format!(
                "unknown schedule {other:?} (expected constant or linear_decay)"
            )),
        }
    }
}

/// Classifier training configuration. Defaults are the standard regime:
/// batch size 32, at most 10 epochs, constant learning rate 1e-3 and Adam
/// with betas (0.9, 0.999) and epsilon 1e-8.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            batch_size: 32,
            max_epochs: 10,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TextClfError> {
        let fail = |reason: String| Err(TextClfError::InvalidConfig { reason });
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be >= 1".into());
        }
        Ok(())
    }
}
