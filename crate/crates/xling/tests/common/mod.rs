//! Shared oracles and fixture helpers for the integration suites. Every
//! routine here is an independent check path: none of them call into the
//! implementation they are used to verify.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xling::numerics::Matrix;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Classic two-sided cyclic Jacobi eigenvalue iteration for a symmetric
/// matrix. Returns eigenvalues sorted descending with matching eigenvector
/// columns.
pub fn jacobi_eigen_sym(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "oracle expects a square matrix");
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);

    for _ in 0..200 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += m.get(p, q) * m.get(p, q);
                }
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // M <- Jᵀ M J over the (p, q) plane.
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap().then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    (eigenvalues, vectors)
}

/// Singular values of `a` computed through the eigen-decomposition of AᵀA.
pub fn singular_values_via_gram(a: &Matrix) -> Vec<f64> {
    let gram = a.transpose().matmul(a);
    let (eigenvalues, _) = jacobi_eigen_sym(&gram);
    eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect()
}

/// Gauss-Jordan inverse with partial pivoting. Panics on singular input;
/// callers feed it deliberately well-conditioned fixtures.
pub fn gauss_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    assert_eq!(n, a.cols(), "oracle expects a square matrix");
    let mut aug = Matrix::from_fn(n, 2 * n, |r, c| {
        if c < n {
            a.get(r, c)
        } else if c - n == r {
            1.0
        } else {
            0.0
        }
    });
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                aug.get(i, col)
                    .abs()
                    .partial_cmp(&aug.get(j, col).abs())
                    .unwrap()
            })
            .unwrap();
        let pivot = aug.get(pivot_row, col);
        assert!(pivot.abs() > 1e-12, "oracle fixture is singular");
        if pivot_row != col {
            for k in 0..2 * n {
                let tmp = aug.get(col, k);
                aug.set(col, k, aug.get(pivot_row, k));
                aug.set(pivot_row, k, tmp);
            }
        }
        let inv_pivot = 1.0 / aug.get(col, col);
        for k in 0..2 * n {
            let v = aug.get(col, k);
            aug.set(col, k, v * inv_pivot);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug.get(row, col);
            if factor == 0.0 {
                continue;
            }
            for k in 0..2 * n {
                let v = aug.get(row, k) - factor * aug.get(col, k);
                aug.set(row, k, v);
            }
        }
    }
    Matrix::from_fn(n, n, |r, c| aug.get(r, c + n))
}

/// Random orthogonal matrix from the QR factorization of a Gaussian draw,
/// with the diagonal sign fixed so the result is unique.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    let g = Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    gram_schmidt_q(&g)
}

/// Orthonormalizes the columns of `a` by modified Gram-Schmidt.
pub fn gram_schmidt_q(a: &Matrix) -> Matrix {
    let n = a.rows();
    let cols = a.cols();
    let mut q = a.clone();
    for j in 0..cols {
        for prev in 0..j {
            let proj: f64 = (0..n).map(|r| q.get(r, prev) * q.get(r, j)).sum();
            for r in 0..n {
                let v = q.get(r, j) - proj * q.get(r, prev);
                q.set(r, j, v);
            }
        }
        let norm: f64 = (0..n).map(|r| q.get(r, j) * q.get(r, j)).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "degenerate draw in gram_schmidt_q");
        // Fix the sign from the diagonal so the factor is deterministic.
        let sign = if q.get(j, j) < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            let v = q.get(r, j) * sign / norm;
            q.set(r, j, v);
        }
    }
    q
}

/// Writes a synthetic pair to disk in the formats the pipeline consumes,
/// returning the file paths keyed by role.
pub fn write_pair_files(
    pair: &xling::harness::SyntheticPair,
    dir: &std::path::Path,
) -> std::collections::BTreeMap<&'static str, std::path::PathBuf> {
    use std::collections::BTreeMap;
    let mut paths = BTreeMap::new();
    let src_emb = dir.join("src.vec");
    let tgt_emb = dir.join("tgt.vec");
    xling::embeddings::save_vec(&pair.src_space, &src_emb).unwrap();
    xling::embeddings::save_vec(&pair.tgt_space, &tgt_emb).unwrap();
    let dict = dir.join("dict.tsv");
    let dict_str: String = pair
        .dictionary
        .pairs()
        .iter()
        .map(|(s, t)| format!("{s}\t{t}\n"))
        .collect();
    std::fs::write(&dict, dict_str).unwrap();
    let train = dir.join("src_train.tsv");
    let dev = dir.join("src_dev.tsv");
    let test = dir.join("tgt_test.tsv");
    xling::textclf::save_dataset(&pair.src_train, &train).unwrap();
    xling::textclf::save_dataset(&pair.src_dev, &dev).unwrap();
    xling::textclf::save_dataset(&pair.tgt_test, &test).unwrap();
    paths.insert("src_emb", src_emb);
    paths.insert("tgt_emb", tgt_emb);
    paths.insert("dict", dict);
    paths.insert("src_train", train);
    paths.insert("src_dev", dev);
    paths.insert("tgt_test", test);
    paths
}

/// Renders a cross-lingual spec file pointing at [`write_pair_files`]
/// output.
pub fn crosslingual_spec_text(
    paths: &std::collections::BTreeMap<&'static str, std::path::PathBuf>,
    method: &str,
    direction: &str,
    extra: &str,
) -> String {
    format!(
        "mode = crosslingual\nmethod = {method}\ndirection = {direction}\n\
         src_emb = {}\ntgt_emb = {}\ndict = {}\n\
         src_train = {}\nsrc_dev = {}\ntgt_test = {}\n{extra}",
        paths["src_emb"].display(),
        paths["tgt_emb"].display(),
        paths["dict"].display(),
        paths["src_train"].display(),
        paths["src_dev"].display(),
        paths["tgt_test"].display(),
    )
}
