//! Flat key=value experiment spec files. Unknown keys are schema
//! violations — in particular, a cross-lingual spec has no field that
//! could name target-language training data, which is how the zero-shot
//! isolation contract is enforced at the schema level.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::embeddings::Normalization;
use crate::textclf::{LrSchedule, TrainConfig};
use crate::transforms::{Distance, Method, RankConfig};

use super::HarnessError;

pub const DEFAULT_REPEATS: usize = 6;
const DEFAULT_CROSSLINGUAL_EPOCHS: usize = 5;
const DEFAULT_MONOLINGUAL_EPOCHS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::SourceToTarget => "source_to_target",
            Direction::TargetToSource => "target_to_source",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "source_to_target" => Ok(Direction::SourceToTarget),
            "target_to_source" => Ok(Direction::TargetToSource),
            other => Err(format!(
                "unknown direction {other:?} (expected source_to_target or target_to_source)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Cnn,
    MeanBaseline,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Cnn => "cnn",
            ClassifierKind::MeanBaseline => "mean_baseline",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnn" => Ok(ClassifierKind::Cnn),
            "mean_baseline" => Ok(ClassifierKind::MeanBaseline),
            other => Err(format!(
                "unknown classifier {other:?} (expected cnn or mean_baseline)"
            )),
        }
    }
}

/// Classifier choice plus its training regime and CNN shape knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSettings {
    pub kind: ClassifierKind,
    pub train: TrainConfig,
    pub filters: usize,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossLingualSpec {
    pub source_lang: String,
    pub target_lang: String,
    pub method: Method,
    pub direction: Direction,
    pub src_emb: PathBuf,
    pub tgt_emb: PathBuf,
    pub dict: PathBuf,
    pub src_train: PathBuf,
    pub src_dev: PathBuf,
    pub tgt_test: PathBuf,
    pub normalize: Normalization,
    pub max_pairs: usize,
    pub repeats: usize,
    pub seed: u64,
    pub classifier: ClassifierSettings,
    pub rank: RankConfig,
    /// None means the data-driven default ridge.
    pub cca_ridge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonolingualSpec {
    pub lang: String,
    pub emb: PathBuf,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub normalize: Normalization,
    pub repeats: usize,
    pub seed: u64,
    pub classifier: ClassifierSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    CrossLingual(CrossLingualSpec),
    Monolingual(MonolingualSpec),
}

impl ExperimentSpec {
    pub fn repeats(&self) -> usize {
        match self {
            ExperimentSpec::CrossLingual(s) => s.repeats,
            ExperimentSpec::Monolingual(s) => s.repeats,
        }
    }
}

struct RawSpec {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl RawSpec {
    fn err(&self, line: usize, detail: impl Into<String>) -> HarnessError {
        HarnessError::Config {
            path: self.path.clone(),
            line,
            detail: detail.into(),
        }
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn required(&mut self, key: &str) -> Result<String, HarnessError> {
        self.take(key)
            .ok_or_else(|| self.err(0, format!("missing required key {key:?}")))
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, HarnessError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some(value) => value
                .parse()
                .map_err(|e| self.err(0, format!("bad value for {key}: {e}"))),
        }
    }

    fn parse_required<T: FromStr>(&mut self, key: &str) -> Result<T, HarnessError>
    where
        T::Err: fmt::Display,
    {
        let value = self.required(key)?;
        value
            .parse()
            .map_err(|e| self.err(0, format!("bad value for {key}: {e}")))
    }

    fn reject_leftovers(&self) -> Result<(), HarnessError> {
        if let Some((key, (line, _))) = self.entries.iter().next() {
            return Err(self.err(*line, format!("unknown key {key:?} for this mode")));
        }
        Ok(())
    }
}

fn read_raw(path: &Path, content: &str) -> Result<RawSpec, HarnessError> {
    let mut entries = BTreeMap::new();
    for (offset, line) in content.lines().enumerate() {
        let line_no = offset + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(HarnessError::Config {
                path: path.to_path_buf(),
                line: line_no,
                detail: format!("expected key=value, got {trimmed:?}"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), (line_no, value)).is_some() {
            return Err(HarnessError::Config {
                path: path.to_path_buf(),
                line: line_no,
                detail: format!("duplicate key {key:?}"),
            });
        }
    }
    Ok(RawSpec {
        path: path.to_path_buf(),
        entries,
    })
}

pub fn parse_spec_file(path: impl AsRef<Path>) -> Result<ExperimentSpec, HarnessError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| HarnessError::Config {
        path: path.to_path_buf(),
        line: 0,
        detail: format!("cannot read spec: {source}"),
    })?;
    parse_spec_str(path, &content)
}

pub fn parse_spec_str(path: &Path, content: &str) -> Result<ExperimentSpec, HarnessError> {
    let mut raw = read_raw(path, content)?;
    let mode = raw.required("mode")?;
    match mode.as_str() {
        "crosslingual" => parse_crosslingual(raw).map(ExperimentSpec::CrossLingual),
        "monolingual" => parse_monolingual(raw).map(ExperimentSpec::Monolingual),
        other => Err(HarnessError::Config {
            path: path.to_path_buf(),
            line: 0,
            detail: format!("unknown mode {other:?} (expected crosslingual or monolingual)"),
        }),
    }
}

fn parse_classifier(
    raw: &mut RawSpec,
    default_epochs: usize,
    seed: u64,
) -> Result<ClassifierSettings, HarnessError> {
    let kind: ClassifierKind = raw.parse("classifier", ClassifierKind::Cnn)?;
    let defaults = TrainConfig::default();
    let train = TrainConfig {
        learning_rate: raw.parse("lr", defaults.learning_rate)?,
        lr_schedule: raw.parse("lr_schedule", LrSchedule::Constant)?,
        batch_size: raw.parse("batch_size", defaults.batch_size)?,
        max_epochs: raw.parse("max_epochs", default_epochs)?,
        seed,
        beta1: defaults.beta1,
        beta2: defaults.beta2,
        epsilon: defaults.epsilon,
    };
    Ok(ClassifierSettings {
        kind,
        train,
        filters: raw.parse("filters", crate::textclf::DEFAULT_FILTERS_PER_WIDTH)?,
        dropout: raw.parse("dropout", crate::textclf::DEFAULT_DROPOUT)?,
    })
}

fn parse_rank(raw: &mut RawSpec, seed: u64) -> Result<RankConfig, HarnessError> {
    let defaults = RankConfig::default();
    Ok(RankConfig {
        margin: raw.parse("rank_margin", defaults.margin)?,
        negatives_per_pair: raw.parse("rank_negatives", defaults.negatives_per_pair)?,
        epochs: raw.parse("rank_epochs", defaults.epochs)?,
        learning_rate: raw.parse("rank_lr", defaults.learning_rate)?,
        seed: raw.parse("rank_seed", seed)?,
        distance: raw.parse("rank_distance", Distance::Cosine)?,
    })
}

fn parse_crosslingual(mut raw: RawSpec) -> Result<CrossLingualSpec, HarnessError> {
    let seed: u64 = raw.parse("seed", 42)?;
    let classifier = parse_classifier(&mut raw, DEFAULT_CROSSLINGUAL_EPOCHS, seed)?;
    let rank = parse_rank(&mut raw, seed)?;
    let cca_ridge = match raw.take("cca_ridge") {
        None => None,
        Some(v) if v == "auto" => None,
        Some(v) => Some(v.parse().map_err(|_| {
            raw.err(0, format!("bad value for cca_ridge: {v:?} (number or auto)"))
        })?),
    };
    let spec = CrossLingualSpec {
        source_lang: raw.parse("source_lang", String::from("source"))?,
        target_lang: raw.parse("target_lang", String::from("target"))?,
        method: raw.parse_required("method")?,
        direction: raw.parse_required("direction")?,
        src_emb: PathBuf::from(raw.required("src_emb")?),
        tgt_emb: PathBuf::from(raw.required("tgt_emb")?),
        dict: PathBuf::from(raw.required("dict")?),
        src_train: PathBuf::from(raw.required("src_train")?),
        src_dev: PathBuf::from(raw.required("src_dev")?),
        tgt_test: PathBuf::from(raw.required("tgt_test")?),
        normalize: raw.parse("normalize", Normalization::None)?,
        max_pairs: raw.parse("max_pairs", crate::dictionary::DEFAULT_MAX_PAIRS)?,
        repeats: raw.parse("repeats", DEFAULT_REPEATS)?,
        seed,
        classifier,
        rank,
        cca_ridge,
    };
    if spec.repeats == 0 {
        return Err(raw.err(0, "repeats must be at least 1"));
    }
    raw.reject_leftovers()?;
    Ok(spec)
}

fn parse_monolingual(mut raw: RawSpec) -> Result<MonolingualSpec, HarnessError> {
    let seed: u64 = raw.parse("seed", 42)?;
    let classifier = parse_classifier(&mut raw, DEFAULT_MONOLINGUAL_EPOCHS, seed)?;
    let spec = MonolingualSpec {
        lang: raw.parse("lang", String::from("source"))?,
        emb: PathBuf::from(raw.required("emb")?),
        train: PathBuf::from(raw.required("train")?),
        dev: PathBuf::from(raw.required("dev")?),
        test: PathBuf::from(raw.required("test")?),
        normalize: raw.parse("normalize", Normalization::None)?,
        repeats: raw.parse("repeats", DEFAULT_REPEATS)?,
        seed,
        classifier,
    };
    if spec.repeats == 0 {
        return Err(raw.err(0, "repeats must be at least 1"));
    }
    raw.reject_leftovers()?;
    Ok(spec)
}
