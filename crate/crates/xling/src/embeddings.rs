//! Word-embedding spaces: loading and saving the text `.vec` format,
//! word lookup with an explicit OOV policy, normalization, and application
//! of a fitted linear map to every vector in a space.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::numerics::{norm, Matrix};
use crate::transforms::LinearMap;

/// Row normalization applied to a space before alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    Unit,
    CenterUnit,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            Normalization::None => "none",
            Normalization::Unit => "unit",
            Normalization::CenterUnit => "center_unit",
        };
        f.write_str(token)
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "unit" => Ok(Normalization::Unit),
            "center_unit" => Ok(Normalization::CenterUnit),
            other => Err(format!(
                "unknown normalization {other:?} (expected none, unit or center_unit)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{path}:1: malformed header, expected \"<count> <dim>\": {detail}")]
    MalformedHeader { path: PathBuf, detail: String },
    #[error("{path}:{line}: expected {expected} values after the word, found {found}")]
    WrongArity {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: {token:?} is not a finite number")]
    BadValue {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}: count mismatch, header declares {declared} words but file has {found} data lines")]
    CountMismatch {
        path: PathBuf,
        declared: usize,
        found: usize,
    },
    #[error("{path}: header declares an empty space")]
    EmptySpace { path: PathBuf },
    #[error("duplicate word {word:?} in constructed space")]
    DuplicateWord { word: String },
    #[error("word list length {words} does not match vector rows {rows}")]
    WordCountMismatch { words: usize, rows: usize },
    #[error("map dimension {map_dim} does not match space dimension {space_dim}")]
    DimensionMismatch { map_dim: usize, space_dim: usize },
}

/// An ordered vocabulary with one embedding row per word.
///
/// Immutable after construction; every transformation produces a new space.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Matrix,
    language_tag: String,
    normalization_applied: Normalization,
    duplicates_dropped: usize,
}

/// Result of a vocabulary lookup: the stored row for known words, an
/// all-zeros vector flagged `oov` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Lookup {
    pub vector: Vec<f64>,
    pub oov: bool,
}

impl EmbeddingSpace {
    /// Builds a space from parallel word and row data. Words must be unique.
    pub fn new(
        words: Vec<String>,
        vectors: Matrix,
        language_tag: impl Into<String>,
    ) -> Result<Self, EmbeddingError> {
        if words.len() != vectors.rows() {
            return Err(EmbeddingError::WordCountMismatch {
                words: words.len(),
                rows: vectors.rows(),
            });
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if index.insert(word.clone(), i).is_some() {
                return Err(EmbeddingError::DuplicateWord { word: word.clone() });
            }
        }
        Ok(Self {
            words,
            index,
            vectors,
            language_tag: language_tag.into(),
            normalization_applied: Normalization::None,
            duplicates_dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn normalization_applied(&self) -> Normalization {
        self.normalization_applied
    }

    /// Number of duplicate words dropped while loading (first occurrence
    /// wins).
    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// Word lookup, case-sensitive. Unknown words map to the zero vector
    /// and are flagged as OOV.
    pub fn lookup(&self, word: &str) -> Lookup {
        match self.index_of(word) {
            Some(i) => Lookup {
                vector: self.row(i).to_vec(),
                oov: false,
            },
            None => Lookup {
                vector: vec![0.0; self.dim()],
                oov: true,
            },
        }
    }

    /// Returns a copy of the space with the requested row normalization.
    /// `None` is the identity and leaves the recorded mode untouched.
    pub fn normalize(&self, mode: Normalization) -> EmbeddingSpace {
        match mode {
            Normalization::None => self.clone(),
            Normalization::Unit => {
                let mut space = self.clone();
                unit_rows(&mut space.vectors);
                space.normalization_applied = Normalization::Unit;
                space
            }
            Normalization::CenterUnit => {
                let mut space = self.clone();
                let rows = space.vectors.rows();
                let cols = space.vectors.cols();
                if rows > 0 {
                    let mut mean = vec![0.0; cols];
                    for i in 0..rows {
                        for (m, v) in mean.iter_mut().zip(space.vectors.row(i)) {
                            *m += v;
                        }
                    }
                    for m in &mut mean {
                        *m /= rows as f64;
                    }
                    for i in 0..rows {
                        for (v, m) in space.vectors.row_mut(i).iter_mut().zip(&mean) {
                            *v -= m;
                        }
                    }
                }
                unit_rows(&mut space.vectors);
                space.normalization_applied = Normalization::CenterUnit;
                space
            }
        }
    }

    /// Applies `map.w` to every vector (rows become W·x); vocabulary and
    /// order are unchanged.
    pub fn apply_transform(&self, map: &LinearMap) -> Result<EmbeddingSpace, EmbeddingError> {
        if map.dim() != self.dim() {
            return Err(EmbeddingError::DimensionMismatch {
                map_dim: map.dim(),
                space_dim: self.dim(),
            });
        }
        let mut space = self.clone();
        // Row convention: (W·x)ᵀ = xᵀ·Wᵀ.
        space.vectors = self.vectors.matmul(&map.w().transpose());
        Ok(space)
    }
}

fn unit_rows(vectors: &mut Matrix) {
    for i in 0..vectors.rows() {
        let row = vectors.row_mut(i);
        let n = norm(row);
        if n > 0.0 {
            for v in row {
                *v /= n;
            }
        }
    }
}

/// Loads a text `.vec` file: a "<count> <dim>" header followed by one
/// "word v1 .. vd" line per word. Duplicate words keep the first occurrence
/// and are counted in [`EmbeddingSpace::duplicates_dropped`].
pub fn load_vec(path: impl AsRef<Path>) -> Result<EmbeddingSpace, EmbeddingError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        action: "open",
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(Ok(line)) => line,
        Some(Err(source)) => {
            return Err(EmbeddingError::Io {
                action: "read",
                path: path.to_path_buf(),
                source,
            })
        }
        None => {
            return Err(EmbeddingError::MalformedHeader {
                path: path.to_path_buf(),
                detail: "file is empty".into(),
            })
        }
    };
    let mut header_fields = header.split_whitespace();
    let declared: usize = parse_header_field(header_fields.next(), path, &header)?;
    let dim: usize = parse_header_field(header_fields.next(), path, &header)?;
    if header_fields.next().is_some() {
        return Err(EmbeddingError::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("trailing fields in {header:?}"),
        });
    }
    if declared == 0 || dim == 0 {
        return Err(EmbeddingError::EmptySpace {
            path: path.to_path_buf(),
        });
    }

    let mut words = Vec::with_capacity(declared);
    let mut index: HashMap<String, usize> = HashMap::with_capacity(declared);
    let mut data: Vec<f64> = Vec::with_capacity(declared * dim);
    let mut duplicates_dropped = 0usize;
    let mut data_lines = 0usize;

    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line.map_err(|source| EmbeddingError::Io {
            action: "read",
            path: path.to_path_buf(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        data_lines += 1;
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap_or_default();
        let values: Vec<&str> = fields.collect();
        if values.len() != dim {
            return Err(EmbeddingError::WrongArity {
                path: path.to_path_buf(),
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        if index.contains_key(word) {
            duplicates_dropped += 1;
            continue;
        }
        for token in &values {
            let value: f64 = token.parse().map_err(|_| EmbeddingError::BadValue {
                path: path.to_path_buf(),
                line: line_no,
                token: (*token).to_string(),
            })?;
            if !value.is_finite() {
                return Err(EmbeddingError::BadValue {
                    path: path.to_path_buf(),
                    line: line_no,
                    token: (*token).to_string(),
                });
            }
            data.push(value);
        }
        index.insert(word.to_string(), words.len());
        words.push(word.to_string());
    }

    if data_lines != declared {
        return Err(EmbeddingError::CountMismatch {
            path: path.to_path_buf(),
            declared,
            found: data_lines,
        });
    }

    let vectors = Matrix::new(words.len(), dim, data).expect("finite values enforced per line");
    Ok(EmbeddingSpace {
        words,
        index,
        vectors,
        language_tag: String::new(),
        normalization_applied: Normalization::None,
        duplicates_dropped,
    })
}

fn parse_header_field(
    field: Option<&str>,
    path: &Path,
    header: &str,
) -> Result<usize, EmbeddingError> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| EmbeddingError::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("{header:?}"),
        })
}

/// Writes a space in the same `.vec` format read by [`load_vec`]. Values
/// use the shortest decimal form that parses back to the identical f64.
pub fn save_vec(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    let io_err = |source| EmbeddingError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{} {}", space.len(), space.dim()).map_err(io_err)?;
    for i in 0..space.len() {
        write!(out, "{}", space.word(i)).map_err(io_err)?;
        for value in space.row(i) {
            write!(out, " {value}").map_err(io_err)?;
        }
        writeln!(out).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space_from(words: &[&str], rows: &[Vec<f64>]) -> EmbeddingSpace {
        EmbeddingSpace::new(
            words.iter().map(|w| w.to_string()).collect(),
            Matrix::from_rows(rows).unwrap(),
            "test",
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_word_file() {
        let f = write_temp("2 3\napple 1 0 0\nbanana 0 1 0\n");
        let space = load_vec(f.path()).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.dim(), 3);
        assert_eq!(space.lookup("apple").vector, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let f = write_temp("2 3\na 1 0 0\nb 0 1 0\nc 0 0 1\n");
        match load_vec(f.path()) {
            Err(EmbeddingError::CountMismatch { declared, found, .. }) => {
                assert_eq!((declared, found), (2, 3));
            }
            other => panic!("expected count mismatch, got {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_reports_line_number() {
        let f = write_temp("2 3\na 1 0 0\nb 0 1\n");
        match load_vec(f.path()) {
            Err(EmbeddingError::WrongArity { line, found, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(found, 2);
            }
            other => panic!("expected arity error, got {other:?}"),
        }
    }

    #[test]
    fn zero_word_header_is_an_error() {
        let f = write_temp("0 3\n");
        assert!(matches!(
            load_vec(f.path()),
            Err(EmbeddingError::EmptySpace { .. })
        ));
    }

    #[test]
    fn duplicates_keep_first_occurrence() {
        let f = write_temp("3 2\na 1 0\na 9 9\nb 0 1\n");
        let space = load_vec(f.path()).unwrap();
        assert_eq!(space.len(), 2);
        assert_eq!(space.duplicates_dropped(), 1);
        assert_eq!(space.lookup("a").vector, vec![1.0, 0.0]);
    }

    #[test]
    fn save_to_bad_path_is_io_error() {
        let space = space_from(&["a"], &[vec![1.0, 2.0]]);
        assert!(matches!(
            save_vec(&space, ""),
            Err(EmbeddingError::Io { .. })
        ));
    }

    #[test]
    fn lookup_is_case_sensitive_and_flags_oov() {
        let space = space_from(&["apple"], &[vec![1.0, 2.0]]);
        assert!(!space.lookup("apple").oov);
        let miss = space.lookup("Apple");
        assert!(miss.oov);
        assert_eq!(miss.vector, vec![0.0, 0.0]);
    }

    #[test]
    fn unit_normalization_scales_rows() {
        let space = space_from(&["a", "zero"], &[vec![3.0, 4.0], vec![0.0, 0.0]]);
        let unit = space.normalize(Normalization::Unit);
        assert_eq!(unit.row(0), &[0.6, 0.8]);
        assert_eq!(unit.row(1), &[0.0, 0.0]);
        assert_eq!(unit.normalization_applied(), Normalization::Unit);
    }

    #[test]
    fn none_normalization_is_identity() {
        let space = space_from(&["a"], &[vec![3.0, 4.0]]);
        let same = space.normalize(Normalization::None);
        assert_eq!(same.row(0), space.row(0));
        assert_eq!(same.normalization_applied(), Normalization::None);
    }

    #[test]
    fn center_unit_matches_hand_computation() {
        // Mean of (1,0) and (3,0) is (2,0); centered rows (-1,0),(1,0)
        // already have unit norm.
        let space = space_from(&["a", "b"], &[vec![1.0, 0.0], vec![3.0, 0.0]]);
        let centered = space.normalize(Normalization::CenterUnit);
        assert_eq!(centered.row(0), &[-1.0, 0.0]);
        assert_eq!(centered.row(1), &[1.0, 0.0]);
    }
}
