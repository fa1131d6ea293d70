//! Bilingual seed dictionaries and construction of the paired seed matrices
//! every transformation fit consumes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::embeddings::{EmbeddingSpace, Normalization};
use crate::numerics::Matrix;

/// Seed dictionaries are truncated to this many pairs unless configured
/// otherwise.
pub const DEFAULT_MAX_PAIRS: usize = 20_000;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: expected exactly one tab separating source and target")]
    MissingTab { path: PathBuf, line: usize },
    #[error("{path}:{line}: empty {side} word")]
    EmptyWord {
        path: PathBuf,
        line: usize,
        side: &'static str,
    },
    #[error("source dimension {src} does not match target dimension {tgt}")]
    DimensionMismatch { src: usize, tgt: usize },
    #[error("max_pairs must be at least 1")]
    InvalidMaxPairs,
    #[error("no dictionary pair has both words in vocabulary ({skipped} skipped as OOV)")]
    NoUsablePairs { skipped: usize },
}

/// Ordered list of (source word, target word) pairs. A source word may map
/// to several targets through multiple lines; fully identical pairs are
/// dropped.
#[derive(Debug, Clone, Default)]
pub struct BilingualDictionary {
    pairs: Vec<(String, String)>,
    duplicates_dropped: usize,
}

impl BilingualDictionary {
    pub fn from_pairs(pairs: Vec<(String, String)>) -> Self {
        let mut dict = BilingualDictionary::default();
        for (source, target) in pairs {
            dict.push(source, target);
        }
        dict
    }

    fn push(&mut self, source: String, target: String) {
        if self
            .pairs
            .iter()
            .any(|(s, t)| *s == source && *t == target)
        {
            self.duplicates_dropped += 1;
        } else {
            self.pairs.push((source, target));
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn duplicates_dropped(&self) -> usize {
        self.duplicates_dropped
    }

    /// The same pairs with source and target sides exchanged, for fitting
    /// the reverse direction.
    pub fn swapped(&self) -> BilingualDictionary {
        BilingualDictionary {
            pairs: self
                .pairs
                .iter()
                .map(|(s, t)| (t.clone(), s.clone()))
                .collect(),
            duplicates_dropped: self.duplicates_dropped,
        }
    }
}

/// Loads a tab-separated dictionary, one "source<TAB>target" pair per line,
/// in file order.
pub fn load_dict(path: impl AsRef<Path>) -> Result<BilingualDictionary, DictionaryError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| DictionaryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut dict = BilingualDictionary::default();
    for (offset, line) in content.lines().enumerate() {
        let line_no = offset + 1;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (source, target) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) => (s, t),
            _ => {
                return Err(DictionaryError::MissingTab {
                    path: path.to_path_buf(),
                    line: line_no,
                })
            }
        };
        for (side, word) in [("source", source), ("target", target)] {
            if word.is_empty() {
                return Err(DictionaryError::EmptyWord {
                    path: path.to_path_buf(),
                    line: line_no,
                    side,
                });
            }
        }
        dict.push(source.to_string(), target.to_string());
    }
    Ok(dict)
}

/// Paired seed vectors: row i of `xs` and `xt` hold the embeddings of
/// `kept_pairs[i]` in the source and target space respectively.
#[derive(Debug, Clone)]
pub struct SeedMatrices {
    pub xs: Matrix,
    pub xt: Matrix,
    pub kept_pairs: Vec<(String, String)>,
    pub skipped_oov: usize,
    /// Normalization mode of the source space the seeds were drawn from,
    /// carried along so fits can record it in their metadata.
    pub normalization: Normalization,
}

impl SeedMatrices {
    pub fn len(&self) -> usize {
        self.kept_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.cols()
    }
}

/// Walks the dictionary in order, skipping pairs with an OOV side, and stops
/// once `max_pairs` pairs are kept. Dictionary order encodes frequency rank,
/// so truncation keeps the most frequent pairs.
pub fn build_seed_matrices(
    dict: &BilingualDictionary,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    max_pairs: usize,
) -> Result<SeedMatrices, DictionaryError> {
    if src.dim() != tgt.dim() {
        return Err(DictionaryError::DimensionMismatch {
            src: src.dim(),
            tgt: tgt.dim(),
        });
    }
    if max_pairs == 0 {
        return Err(DictionaryError::InvalidMaxPairs);
    }

    let mut kept_pairs = Vec::new();
    let mut xs_rows: Vec<f64> = Vec::new();
    let mut xt_rows: Vec<f64> = Vec::new();
    let mut skipped_oov = 0usize;
    for (source, target) in dict.pairs() {
        if kept_pairs.len() == max_pairs {
            break;
        }
        match (src.index_of(source), tgt.index_of(target)) {
            (Some(si), Some(ti)) => {
                xs_rows.extend_from_slice(src.row(si));
                xt_rows.extend_from_slice(tgt.row(ti));
                kept_pairs.push((source.clone(), target.clone()));
            }
            _ => skipped_oov += 1,
        }
    }

    if kept_pairs.is_empty() {
        return Err(DictionaryError::NoUsablePairs {
            skipped: skipped_oov,
        });
    }

    let n = kept_pairs.len();
    let d = src.dim();
    Ok(SeedMatrices {
        xs: Matrix::new(n, d, xs_rows).expect("rows copied from a finite space"),
        xt: Matrix::new(n, d, xt_rows).expect("rows copied from a finite space"),
        kept_pairs,
        skipped_oov,
        normalization: src.normalization_applied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn space_of(words: &[&str]) -> EmbeddingSpace {
        let n = words.len();
        let vectors = Matrix::from_fn(n, 3, |i, j| if i % 3 == j { 1.0 } else { 0.1 * i as f64 });
        EmbeddingSpace::new(words.iter().map(|w| w.to_string()).collect(), vectors, "t").unwrap()
    }

    #[test]
    fn loads_tab_separated_pairs() {
        let f = write_temp("dog\tpes\ncat\tko\u{10d}ka\n");
        let dict = load_dict(f.path()).unwrap();
        assert_eq!(dict.len(), 2);
        assert_eq!(dict.pairs()[1], ("cat".into(), "ko\u{10d}ka".into()));
    }

    #[test]
    fn duplicate_pair_is_dropped_with_count() {
        let f = write_temp("dog\tpes\ndog\tpes\n");
        let dict = load_dict(f.path()).unwrap();
        assert_eq!(dict.len(), 1);
        assert_eq!(dict.duplicates_dropped(), 1);
    }

    #[test]
    fn space_separated_line_is_rejected_with_line_number() {
        let f = write_temp("dog pes\n");
        match load_dict(f.path()) {
            Err(DictionaryError::MissingTab { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected tab error, got {other:?}"),
        }
    }

    #[test]
    fn two_tab_line_is_rejected() {
        let f = write_temp("dog\tpes\textra\n");
        assert!(matches!(
            load_dict(f.path()),
            Err(DictionaryError::MissingTab { line: 1, .. })
        ));
    }

    #[test]
    fn same_source_multiple_targets_allowed() {
        let f = write_temp("dog\tpes\ndog\tpejsek\n");
        let dict = load_dict(f.path()).unwrap();
        assert_eq!(dict.len(), 2);
    }

    #[test]
    fn seed_matrices_keep_in_vocab_pairs() {
        let src = space_of(&["a", "b", "c"]);
        let tgt = space_of(&["x", "y", "z"]);
        let dict = BilingualDictionary::from_pairs(vec![
            ("a".into(), "x".into()),
            ("b".into(), "y".into()),
            ("c".into(), "z".into()),
        ]);
        let seeds = build_seed_matrices(&dict, &src, &tgt, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(seeds.len(), 3);
        assert_eq!(seeds.skipped_oov, 0);
        // Row correspondence is exact, not approximate.
        for (i, (s, t)) in seeds.kept_pairs.iter().enumerate() {
            assert_eq!(seeds.xs.row(i), src.row(src.index_of(s).unwrap()));
            assert_eq!(seeds.xt.row(i), tgt.row(tgt.index_of(t).unwrap()));
        }
    }

    #[test]
    fn oov_pairs_are_skipped_and_counted() {
        let src = space_of(&["a", "b"]);
        let tgt = space_of(&["x", "y"]);
        let dict = BilingualDictionary::from_pairs(vec![
            ("a".into(), "x".into()),
            ("missing".into(), "y".into()),
            ("b".into(), "y".into()),
        ]);
        let seeds = build_seed_matrices(&dict, &src, &tgt, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds.skipped_oov, 1);
    }

    #[test]
    fn truncation_keeps_first_pairs_in_order() {
        let words: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let src = space_of(&refs);
        let tgt = space_of(&refs);
        let dict = BilingualDictionary::from_pairs(
            words.iter().map(|w| (w.clone(), w.clone())).collect(),
        );
        let seeds = build_seed_matrices(&dict, &src, &tgt, 10).unwrap();
        assert_eq!(seeds.len(), 10);
        assert_eq!(seeds.kept_pairs[9].0, "w9");
    }

    #[test]
    fn all_oov_dictionary_is_an_error() {
        let src = space_of(&["a"]);
        let tgt = space_of(&["x"]);
        let dict = BilingualDictionary::from_pairs(vec![("q".into(), "x".into())]);
        assert!(matches!(
            build_seed_matrices(&dict, &src, &tgt, 10),
            Err(DictionaryError::NoUsablePairs { skipped: 1 })
        ));
    }
}
