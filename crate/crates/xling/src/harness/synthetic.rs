//! Desk-scale validation substrate: a synthetic language pair whose target
//! space is a planted rotation of the source space (plus optional noise),
//! with an identity dictionary and bag-of-words polarity datasets.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dictionary::BilingualDictionary;
use crate::embeddings::EmbeddingSpace;
use crate::numerics::{norm, Matrix};
use crate::textclf::{Label, LabeledDataset, SplitTag};

use super::HarnessError;

/// Strength of the class-correlated component added to polarity words
/// before re-normalization. Puts same-class word pairs at cosine ≈ 0.6,
/// which both classifiers can separate and the ranking loss can optimize.
const CLASS_COMPONENT: f64 = 1.2;

/// Probability that a sampled text token is a polarity word.
const POLARITY_TOKEN_PROB: f64 = 0.6;

/// Probability that a polarity token is drawn from the text's own class
/// rather than the opposite one. Texts stay majority-labeled but carry
/// some contamination.
const CLASS_PURITY: f64 = 0.85;

const TEXT_LEN_RANGE: std::ops::RangeInclusive<usize> = 6..=14;

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub src_space: EmbeddingSpace,
    pub tgt_space: EmbeddingSpace,
    pub dictionary: BilingualDictionary,
    pub src_train: LabeledDataset,
    pub src_dev: LabeledDataset,
    pub tgt_test: LabeledDataset,
    /// The planted orthogonal map, kept for recovery checks.
    pub rotation: Matrix,
}

/// Generates the pair. Source vectors are unit-normalized Gaussians; the
/// first `vocab_size · polarity_fraction` words carry a sign-coded class
/// direction; the target space is rotation · source plus entrywise
/// Gaussian noise of scale `noise_sigma`. Texts are word bags labeled by
/// the majority polarity of their polarity words.
pub fn generate_synthetic_pair(
    vocab_size: usize,
    dim: usize,
    rotation_seed: u64,
    noise_sigma: f64,
    n_examples: usize,
    polarity_fraction: f64,
) -> Result<SyntheticPair, HarnessError> {
    if vocab_size < 20 {
        return Err(HarnessError::InvalidSynthConfig {
            reason: format!("vocab_size must be at least 20, got {vocab_size}"),
        });
    }
    if dim < 2 {
        return Err(HarnessError::InvalidSynthConfig {
            reason: format!("dim must be at least 2, got {dim}"),
        });
    }
    if !(0.0..=1.0).contains(&polarity_fraction) || vocab_size as f64 * polarity_fraction < 2.0 {
        return Err(HarnessError::InvalidSynthConfig {
            reason: format!(
                "polarity_fraction {polarity_fraction} must leave at least one word per class"
            ),
        });
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(HarnessError::InvalidSynthConfig {
            reason: format!("noise_sigma must be finite and non-negative, got {noise_sigma}"),
        });
    }
    if n_examples < 4 {
        return Err(HarnessError::InvalidSynthConfig {
            reason: format!("n_examples must be at least 4, got {n_examples}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rotation_seed);
    let n_polarity = (vocab_size as f64 * polarity_fraction).round() as usize;

    // Source vectors: unit Gaussians, polarity words shifted along a shared
    // class direction (positive words +, negative words −) and re-normalized.
    let mut direction: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let dn = norm(&direction);
    for v in &mut direction {
        *v /= dn;
    }
    let mut src_vectors = Matrix::zeros(vocab_size, dim);
    for i in 0..vocab_size {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let vn = norm(&v);
        for x in &mut v {
            *x /= vn;
        }
        if i < n_polarity {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            for (x, d) in v.iter_mut().zip(&direction) {
                *x += CLASS_COMPONENT * sign * d;
            }
            let vn = norm(&v);
            for x in &mut v {
                *x /= vn;
            }
        }
        src_vectors.row_mut(i).copy_from_slice(&v);
    }

    let rotation = random_orthogonal(&mut rng, dim);
    let mut tgt_vectors = src_vectors.matmul(&rotation.transpose());
    if noise_sigma > 0.0 {
        for i in 0..vocab_size {
            for v in tgt_vectors.row_mut(i) {
                let g: f64 = StandardNormal.sample(&mut rng);
                *v += noise_sigma * g;
            }
        }
    }

    let src_words: Vec<String> = (0..vocab_size).map(|i| format!("s:w{i:04}")).collect();
    let tgt_words: Vec<String> = (0..vocab_size).map(|i| format!("t:w{i:04}")).collect();
    let src_space = EmbeddingSpace::new(src_words.clone(), src_vectors, "synthetic-src")
        .expect("constructed words are unique");
    let tgt_space = EmbeddingSpace::new(tgt_words.clone(), tgt_vectors, "synthetic-tgt")
        .expect("constructed words are unique");
    let dictionary = BilingualDictionary::from_pairs(
        src_words
            .iter()
            .zip(&tgt_words)
            .map(|(s, t)| (s.clone(), t.clone()))
            .collect(),
    );

    let n_dev = (n_examples / 4).max(8);
    let n_test = (n_examples / 2).max(16);
    let src_train = make_texts(
        &mut rng,
        &src_words,
        n_polarity,
        n_examples,
        SplitTag::Train,
    )?;
    let src_dev = make_texts(&mut rng, &src_words, n_polarity, n_dev, SplitTag::Dev)?;
    let tgt_test = make_texts(&mut rng, &tgt_words, n_polarity, n_test, SplitTag::Test)?;

    Ok(SyntheticPair {
        src_space,
        tgt_space,
        dictionary,
        src_train,
        src_dev,
        tgt_test,
        rotation,
    })
}

fn make_texts(
    rng: &mut ChaCha8Rng,
    words: &[String],
    n_polarity: usize,
    count: usize,
    split_tag: SplitTag,
) -> Result<LabeledDataset, HarnessError> {
    let mut examples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..1000 {
            // Intended class for this text; polarity tokens favor it at
            // CLASS_PURITY but the label is still the sampled majority.
            let class = rng.random_range(0..2usize);
            let len = rng.random_range(TEXT_LEN_RANGE);
            let mut tokens = Vec::with_capacity(len);
            let mut positive = 0usize;
            let mut negative = 0usize;
            for _ in 0..len {
                let idx = if rng.random::<f64>() < POLARITY_TOKEN_PROB {
                    let own_class = rng.random::<f64>() < CLASS_PURITY;
                    let parity = if own_class { class } else { 1 - class };
                    // Words of that class sit at indices of matching parity.
                    let slots = (n_polarity + (1 - parity)) / 2;
                    2 * rng.random_range(0..slots) + parity
                } else {
                    rng.random_range(0..words.len())
                };
                if idx < n_polarity {
                    if idx % 2 == 0 {
                        positive += 1;
                    } else {
                        negative += 1;
                    }
                }
                tokens.push(words[idx].clone());
            }
            if positive != negative {
                let label = if positive > negative {
                    Label::Positive
                } else {
                    Label::Negative
                };
                accepted = Some((tokens.join(" "), label));
                break;
            }
        }
        let example = accepted.ok_or_else(|| HarnessError::InvalidSynthConfig {
            reason: "could not sample a majority-polarity text in 1000 tries".into(),
        })?;
        examples.push(example);
    }
    Ok(LabeledDataset::new(examples, split_tag))
}

/// Orthogonal matrix from Gram-Schmidt of a Gaussian draw, with column
/// signs fixed from the diagonal so the factor is unique.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let mut q = g;
    for j in 0..n {
        for p in 0..j {
            let proj: f64 = (0..n).map(|r| q.get(r, p) * q.get(r, j)).sum();
            for r in 0..n {
                let v = q.get(r, j) - proj * q.get(r, p);
                q.set(r, j, v);
            }
        }
        let column_norm: f64 = (0..n).map(|r| q.get(r, j) * q.get(r, j)).sum::<f64>().sqrt();
        let sign = if q.get(j, j) < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            let v = q.get(r, j) * sign / column_norm;
            q.set(r, j, v);
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate_synthetic_pair(40, 4, 9, 0.1, 20, 0.4).unwrap();
        let b = generate_synthetic_pair(40, 4, 9, 0.1, 20, 0.4).unwrap();
        assert_eq!(a.src_space.vectors(), b.src_space.vectors());
        assert_eq!(a.tgt_space.vectors(), b.tgt_space.vectors());
        assert_eq!(a.src_train.examples, b.src_train.examples);
        assert_eq!(a.tgt_test.examples, b.tgt_test.examples);
    }

    #[test]
    fn zero_noise_target_is_exactly_the_rotated_source() {
        let pair = generate_synthetic_pair(30, 5, 3, 0.0, 20, 0.3).unwrap();
        let rotated = pair
            .src_space
            .vectors()
            .matmul(&pair.rotation.transpose());
        assert_eq!(rotated, *pair.tgt_space.vectors());
    }

    #[test]
    fn dictionary_pairs_words_by_index() {
        let pair = generate_synthetic_pair(25, 3, 1, 0.0, 20, 0.2).unwrap();
        assert_eq!(pair.dictionary.len(), 25);
        assert_eq!(
            pair.dictionary.pairs()[7],
            ("s:w0007".to_string(), "t:w0007".to_string())
        );
    }

    #[test]
    fn labels_match_majority_polarity_of_tokens() {
        let pair = generate_synthetic_pair(40, 4, 5, 0.0, 30, 0.5).unwrap();
        for (text, label) in &pair.src_train.examples {
            let mut positive = 0i64;
            let mut negative = 0i64;
            for token in text.split(' ') {
                let idx: usize = token[3..].parse().unwrap();
                if idx < 20 {
                    if idx % 2 == 0 {
                        positive += 1;
                    } else {
                        negative += 1;
                    }
                }
            }
            let expected = if positive > negative {
                Label::Positive
            } else {
                Label::Negative
            };
            assert_ne!(positive, negative, "tie should have been resampled");
            assert_eq!(*label, expected);
        }
    }

    #[test]
    fn undersized_configs_are_rejected() {
        assert!(generate_synthetic_pair(10, 4, 1, 0.0, 20, 0.3).is_err());
        assert!(generate_synthetic_pair(30, 1, 1, 0.0, 20, 0.3).is_err());
        assert!(generate_synthetic_pair(30, 4, 1, -0.1, 20, 0.3).is_err());
    }
}
