//! Versioned text checkpoints. Every value is written in the shortest
//! decimal form that parses back to the identical f64, so save → load is
//! bit-exact. The training configuration rides along with the tensors.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use crate::numerics::Matrix;

use super::cnn::{CnnModel, FILTER_WIDTHS};
use super::train::{Classifier, MeanModel};
use super::{LrSchedule, TextClfError, TrainConfig};

const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(
    clf: &Classifier,
    cfg: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<(), TextClfError> {
    let path = path.as_ref();
    let io_err = |source: io::Error| TextClfError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = io::BufWriter::new(file);
    let mut w = |line: String| -> Result<(), TextClfError> {
        writeln!(out, "{line}").map_err(io_err)
    };

    w(format!("xling-model {FORMAT_VERSION}"))?;
    w(format!("kind {}", clf.kind()))?;
    w(format!("dim {}", clf.dim()))?;
    match clf {
        Classifier::Cnn(model) => {
            w(format!(
                "widths {}",
                FILTER_WIDTHS.map(|x| x.to_string()).join(" ")
            ))?;
            w(format!("filters {}", model.filters_per_width()))?;
            w(format!("dropout {}", model.dropout_rate()))?;
        }
        Classifier::Mean(_) => {}
    }
    w(format!("lr {}", cfg.learning_rate))?;
    w(format!("lr_schedule {}", cfg.lr_schedule))?;
    w(format!("batch_size {}", cfg.batch_size))?;
    w(format!("max_epochs {}", cfg.max_epochs))?;
    w(format!("seed {}", cfg.seed))?;
    w(format!("beta1 {}", cfg.beta1))?;
    w(format!("beta2 {}", cfg.beta2))?;
    w(format!("epsilon {}", cfg.epsilon))?;

    let tensor_names: Vec<String> = tensor_names(clf);
    match clf {
        Classifier::Cnn(model) => {
            let mut shapes: Vec<(usize, usize)> = Vec::new();
            for cw in model.conv_weights() {
                shapes.push((cw.rows(), cw.cols()));
            }
            for cb in model.conv_bias() {
                shapes.push((1, cb.len()));
            }
            shapes.push((model.dense_weights().rows(), model.dense_weights().cols()));
            shapes.push((1, model.dense_bias().len()));
            for ((name, (rows, cols)), tensor) in
                tensor_names.iter().zip(shapes).zip(model.tensors())
            {
                w(format!("tensor {name} {rows} {cols}"))?;
                for row in tensor.chunks(cols) {
                    w(row
                        .iter()
                        .map(|v| format!("{v}"))
                        .collect::<Vec<_>>()
                        .join(" "))?;
                }
            }
        }
        Classifier::Mean(model) => {
            let weights = model.weights();
            w(format!("tensor w {} {}", weights.rows(), weights.cols()))?;
            for i in 0..weights.rows() {
                w(weights
                    .row(i)
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(" "))?;
            }
            w(format!("tensor b 1 {}", model.bias().len()))?;
            w(model
                .bias()
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(" "))?;
        }
    }
    w("end".to_string())?;
    out.flush().map_err(io_err)
}

fn tensor_names(clf: &Classifier) -> Vec<String> {
    match clf {
        Classifier::Cnn(_) => {
            let mut names: Vec<String> = FILTER_WIDTHS
                .iter()
                .map(|w| format!("conv_w_{w}"))
                .collect();
            names.extend(FILTER_WIDTHS.iter().map(|w| format!("conv_b_{w}")));
            names.push("dense_w".into());
            names.push("dense_b".into());
            names
        }
        Classifier::Mean(_) => vec!["w".into(), "b".into()],
    }
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    line_no: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str, TextClfError> {
        loop {
            self.line_no += 1;
            match self.lines.next() {
                Some(line) if line.is_empty() => continue,
                Some(line) => return Ok(line),
                None => {
                    return Err(self.err("unexpected end of file"));
                }
            }
        }
    }

    fn err(&self, detail: impl Into<String>) -> TextClfError {
        TextClfError::Checkpoint {
            path: self.path.clone(),
            line: self.line_no,
            detail: detail.into(),
        }
    }

    /// Reads a "key value..." line and returns the value fields.
    fn field(&mut self, key: &str) -> Result<Vec<&'a str>, TextClfError> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some(k) if k == key => Ok(parts.collect()),
            _ => Err(self.err(format!("expected {key:?}, got {line:?}"))),
        }
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, TextClfError> {
        let fields = self.field(key)?;
        if fields.len() != 1 {
            return Err(self.err(format!("expected one value for {key}")));
        }
        fields[0]
            .parse()
            .map_err(|_| self.err(format!("bad value for {key}: {:?}", fields[0])))
    }

    fn tensor(&mut self, name: &str) -> Result<Matrix, TextClfError> {
        let header = self.field("tensor")?;
        if header.len() != 3 || header[0] != name {
            return Err(self.err(format!("expected tensor {name}")));
        }
        let rows: usize = header[1]
            .parse()
            .map_err(|_| self.err("bad tensor rows"))?;
        let cols: usize = header[2]
            .parse()
            .map_err(|_| self.err("bad tensor cols"))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next()?;
            let mut count = 0usize;
            for token in line.split_whitespace() {
                let value: f64 = token
                    .parse()
                    .map_err(|_| self.err(format!("{token:?} is not a number")))?;
                data.push(value);
                count += 1;
            }
            if count != cols {
                return Err(self.err(format!("expected {cols} values, found {count}")));
            }
        }
        Matrix::new(rows, cols, data).map_err(|e| self.err(e.to_string()))
    }
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(Classifier, TrainConfig), TextClfError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| TextClfError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        lines: content.lines(),
        line_no: 0,
        path: path.to_path_buf(),
    };

    let version: u32 = r.scalar("xling-model")?;
    if version != FORMAT_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let kind = r.field("kind")?;
    let kind = *kind.first().ok_or_else(|| r.err("missing kind"))?;
    let dim: usize = r.scalar("dim")?;

    let (filters, dropout) = if kind == "cnn" {
        let widths = r.field("widths")?;
        let expected: Vec<String> = FILTER_WIDTHS.iter().map(|w| w.to_string()).collect();
        if widths != expected {
            return Err(r.err(format!("unsupported filter widths {widths:?}")));
        }
        let filters: usize = r.scalar("filters")?;
        let dropout: f64 = r.scalar("dropout")?;
        (filters, dropout)
    } else if kind == "mean_baseline" {
        (0, 0.0)
    } else {
        return Err(r.err(format!("unknown model kind {kind:?}")));
    };

    let cfg = TrainConfig {
        learning_rate: r.scalar("lr")?,
        lr_schedule: {
            let fields = r.field("lr_schedule")?;
            fields
                .first()
                .and_then(|s| s.parse::<LrSchedule>().ok())
                .ok_or_else(|| r.err("bad lr_schedule"))?
        },
        batch_size: r.scalar("batch_size")?,
        max_epochs: r.scalar("max_epochs")?,
        seed: r.scalar("seed")?,
        beta1: r.scalar("beta1")?,
        beta2: r.scalar("beta2")?,
        epsilon: r.scalar("epsilon")?,
    };

    let clf = if kind == "cnn" {
        let mut conv_weights = Vec::new();
        for w in FILTER_WIDTHS {
            let tensor = r.tensor(&format!("conv_w_{w}"))?;
            if tensor.rows() != filters || tensor.cols() != w * dim {
                return Err(r.err(format!("conv_w_{w} has wrong shape")));
            }
            conv_weights.push(tensor);
        }
        let mut conv_bias = Vec::new();
        for w in FILTER_WIDTHS {
            let tensor = r.tensor(&format!("conv_b_{w}"))?;
            if tensor.cols() != filters {
                return Err(r.err(format!("conv_b_{w} has wrong shape")));
            }
            conv_bias.push(tensor.as_slice().to_vec());
        }
        let dense_w = r.tensor("dense_w")?;
        let total = FILTER_WIDTHS.len() * filters;
        if dense_w.rows() != 2 || dense_w.cols() != total {
            return Err(r.err("dense_w has wrong shape"));
        }
        let dense_b = r.tensor("dense_b")?;
        if dense_b.cols() != 2 {
            return Err(r.err("dense_b has wrong shape"));
        }
        Classifier::Cnn(CnnModel::from_tensors(
            dim,
            filters,
            dropout,
            conv_weights,
            conv_bias,
            dense_w,
            dense_b.as_slice().to_vec(),
        ))
    } else {
        let weights = r.tensor("w")?;
        if weights.rows() != 2 || weights.cols() != dim {
            return Err(r.err("w has wrong shape"));
        }
        let bias = r.tensor("b")?;
        if bias.cols() != 2 {
            return Err(r.err("b has wrong shape"));
        }
        Classifier::Mean(MeanModel::from_tensors(weights, bias.as_slice().to_vec()))
    };

    let end = r.next()?;
    if end != "end" {
        return Err(r.err(format!("expected end marker, got {end:?}")));
    }
    Ok((clf, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnn_checkpoint_round_trips_exactly() {
        let model = CnnModel::new(3, 2, 0.5, 21);
        let cfg = TrainConfig::default();
        let clf = Classifier::Cnn(model);
        let file = tempfile::NamedTempFile::new().unwrap();
        save_checkpoint(&clf, &cfg, file.path()).unwrap();
        let (loaded, loaded_cfg) = load_checkpoint(file.path()).unwrap();
        assert_eq!(loaded, clf);
        assert_eq!(loaded_cfg, cfg);
    }

    #[test]
    fn mean_checkpoint_round_trips_exactly() {
        let clf = Classifier::Mean(MeanModel::new(5, 3));
        let cfg = TrainConfig {
            learning_rate: 1e-4,
            lr_schedule: LrSchedule::LinearDecay,
            ..TrainConfig::default()
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        save_checkpoint(&clf, &cfg, file.path()).unwrap();
        let (loaded, loaded_cfg) = load_checkpoint(file.path()).unwrap();
        assert_eq!(loaded, clf);
        assert_eq!(loaded_cfg, cfg);
    }

    #[test]
    fn truncated_checkpoint_reports_line() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write as _;
        write!(file, "xling-model 1\nkind mean\ndim 2\n").unwrap();
        assert!(matches!(
            load_checkpoint(file.path()),
            Err(TextClfError::Checkpoint { .. })
        ));
    }
}
