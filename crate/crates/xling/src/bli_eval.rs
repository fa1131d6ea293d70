//! Alignment diagnostics: nearest-neighbor translation retrieval
//! (precision@k) over a test dictionary, and a hubness measure — the
//! skewness of how often each target word shows up in the retrieved
//! neighborhoods.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dictionary::BilingualDictionary;
use crate::embeddings::EmbeddingSpace;
use crate::numerics::{cosine_similarity, norm};
use crate::transforms::LinearMap;

#[derive(Debug, Error)]
pub enum BliError {
    #[error("dimension mismatch: map is {map_dim}, source space {src_dim}, target space {tgt_dim}")]
    DimensionMismatch {
        map_dim: usize,
        src_dim: usize,
        tgt_dim: usize,
    },
    #[error("no test pair has both words in vocabulary ({skipped} skipped as OOV)")]
    NoEvaluablePairs { skipped: usize },
    #[error("k values must be non-empty and at least 1")]
    InvalidKs,
    #[error("sample size {sample} exceeds source vocabulary {vocab}")]
    SampleTooLarge { sample: usize, vocab: usize },
    #[error("every sampled source vector has zero norm")]
    DegenerateSample,
}

/// Retrieval quality report, serialized as a flat key=value block.
#[derive(Debug, Clone)]
pub struct BliReport {
    /// precision@k keyed by k, ascending.
    pub precision_at: BTreeMap<usize, f64>,
    pub evaluated_pairs: usize,
    pub skipped_oov: usize,
    /// Filled in when a hubness pass has been run.
    pub hubness_skew: Option<f64>,
}

impl BliReport {
    pub fn to_kv_block(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "evaluated_pairs={}", self.evaluated_pairs);
        let _ = writeln!(out, "skipped_oov={}", self.skipped_oov);
        for (k, p) in &self.precision_at {
            let _ = writeln!(out, "p@{k}={p:.6}");
        }
        if let Some(skew) = self.hubness_skew {
            let _ = writeln!(out, "hubness_skew={skew:.6}");
        }
        out
    }
}

/// Indices of the top-k rows of `space` by cosine similarity to `query`,
/// descending, ties broken by ascending vocabulary index. Zero-norm rows
/// (and zero-norm queries) score -1. A k beyond the vocabulary is clamped.
pub fn nearest_neighbor_indices(query: &[f64], space: &EmbeddingSpace, k: usize) -> Vec<usize> {
    let vocab = space.len();
    let k = if k > vocab {
        log::warn!("k={k} exceeds vocabulary size {vocab}; clamping");
        vocab
    } else {
        k
    };
    // Keep a small sorted buffer of the best (similarity, index) pairs.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..vocab {
        let sim = cosine_similarity(query, space.row(i));
        let candidate = (sim, i);
        let pos = best.partition_point(|&(s, idx)| s > sim || (s == sim && idx < i));
        if pos < k {
            best.insert(pos, candidate);
            best.truncate(k);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Same retrieval, returning words.
pub fn nearest_neighbors<'s>(
    query: &[f64],
    space: &'s EmbeddingSpace,
    k: usize,
) -> Vec<&'s str> {
    nearest_neighbor_indices(query, space, k)
        .into_iter()
        .map(|i| space.word(i))
        .collect()
}

/// Translation retrieval precision: every test pair with both words in
/// vocabulary is evaluated by mapping the source vector through `map` and
/// checking whether any in-vocabulary translation of that source word
/// appears in the target top-k. A pair with either side OOV is skipped and
/// counted.
pub fn precision_at_k(
    map: &LinearMap,
    test_dict: &BilingualDictionary,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    ks: &[usize],
) -> Result<BliReport, BliError> {
    if map.dim() != src.dim() || map.dim() != tgt.dim() {
        return Err(BliError::DimensionMismatch {
            map_dim: map.dim(),
            src_dim: src.dim(),
            tgt_dim: tgt.dim(),
        });
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(BliError::InvalidKs);
    }
    let mut ks_sorted = ks.to_vec();
    ks_sorted.sort_unstable();
    ks_sorted.dedup();
    let max_k = *ks_sorted.last().expect("non-empty ks");

    // All in-vocabulary translations listed for each source word.
    let mut translations: HashMap<&str, Vec<usize>> = HashMap::new();
    for (source, target) in test_dict.pairs() {
        if let Some(ti) = tgt.index_of(target) {
            let entry = translations.entry(source.as_str()).or_default();
            if !entry.contains(&ti) {
                entry.push(ti);
            }
        }
    }

    let mut hits: BTreeMap<usize, usize> = ks_sorted.iter().map(|&k| (k, 0)).collect();
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    let mut best_rank_cache: HashMap<&str, Option<usize>> = HashMap::new();
    for (source, target) in test_dict.pairs() {
        let src_idx = src.index_of(source);
        let tgt_idx = tgt.index_of(target);
        let (Some(src_idx), Some(_)) = (src_idx, tgt_idx) else {
            skipped += 1;
            continue;
        };
        evaluated += 1;
        let best_rank = *best_rank_cache.entry(source.as_str()).or_insert_with(|| {
            let mapped = map.apply(src.row(src_idx));
            let neighbors = nearest_neighbor_indices(&mapped, tgt, max_k);
            let valid = &translations[source.as_str()];
            neighbors.iter().position(|idx| valid.contains(idx))
        });
        if let Some(rank) = best_rank {
            for (&k, count) in hits.iter_mut() {
                if rank < k {
                    *count += 1;
                }
            }
        }
    }

    if evaluated == 0 {
        return Err(BliError::NoEvaluablePairs { skipped });
    }
    let precision_at = hits
        .into_iter()
        .map(|(k, h)| (k, h as f64 / evaluated as f64))
        .collect();
    Ok(BliReport {
        precision_at,
        evaluated_pairs: evaluated,
        skipped_oov: skipped,
        hubness_skew: None,
    })
}

/// Transforms a seeded sample of source vectors, counts how many sampled
/// queries retrieve each target word in their top-k (N_k), and returns the
/// standardized skewness of the N_k distribution. Higher means a few
/// target words dominate the neighborhoods.
pub fn hubness_skew(
    map: &LinearMap,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
    k: usize,
    sample: usize,
    seed: u64,
) -> Result<f64, BliError> {
    if map.dim() != src.dim() || map.dim() != tgt.dim() {
        return Err(BliError::DimensionMismatch {
            map_dim: map.dim(),
            src_dim: src.dim(),
            tgt_dim: tgt.dim(),
        });
    }
    if sample == 0 || sample > src.len() {
        return Err(BliError::SampleTooLarge {
            sample,
            vocab: src.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample_indices(&mut rng, src.len(), sample).into_vec();
    chosen.sort_unstable();
    if chosen.iter().all(|&i| norm(src.row(i)) == 0.0) {
        return Err(BliError::DegenerateSample);
    }

    let mut counts = vec![0u64; tgt.len()];
    for &i in &chosen {
        let mapped = map.apply(src.row(i));
        for neighbor in nearest_neighbor_indices(&mapped, tgt, k) {
            counts[neighbor] += 1;
        }
    }
    Ok(standardized_skewness(&counts))
}

fn standardized_skewness(counts: &[u64]) -> f64 {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let m2 = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    if m2 < 1e-24 {
        return 0.0;
    }
    let m3 = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(3))
        .sum::<f64>()
        / n;
    m3 / m2.powf(1.5)
}
