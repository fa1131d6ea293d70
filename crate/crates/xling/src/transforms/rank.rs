//! Max-margin ranking fits: correct translations are pushed closer to the
//! mapped source vector than sampled negative translations by at least the
//! margin. `fit_or_ra` additionally projects the matrix back onto the
//! orthogonal group after every epoch.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dictionary::SeedMatrices;
use crate::numerics::{dot, norm, svd, Matrix};

use super::{
    check_not_degenerate, fit_mse, fit_orthogonal, FitMeta, LinearMap, Method, TransformError,
};

/// Distance used by the ranking loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    #[default]
    Cosine,
    SqEuclidean,
}

impl Distance {
    fn eval(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            // Cosine distance = 1 − cosine similarity.
            Distance::Cosine => {
                let nu = norm(u);
                let nv = norm(v);
                if nu == 0.0 || nv == 0.0 {
                    2.0
                } else {
                    1.0 - dot(u, v) / (nu * nv)
                }
            }
            Distance::SqEuclidean => u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum(),
        }
    }

    /// Gradient of `eval(u, v)` with respect to `u`.
    fn grad_u(self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Distance::Cosine => {
                let nu = norm(u);
                let nv = norm(v);
                if nu == 0.0 || nv == 0.0 {
                    return vec![0.0; u.len()];
                }
                let uv = dot(u, v);
                let scale_v = 1.0 / (nu * nv);
                let scale_u = uv / (nu * nu * nu * nv);
                u.iter()
                    .zip(v)
                    .map(|(ui, vi)| -(vi * scale_v - ui * scale_u))
                    .collect()
            }
            Distance::SqEuclidean => u.iter().zip(v).map(|(a, b)| 2.0 * (a - b)).collect(),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Cosine => "cosine",
            Distance::SqEuclidean => "sq_euclidean",
        })
    }
}

impl FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Distance::Cosine),
            "sq_euclidean" => Ok(Distance::SqEuclidean),
            other => Err(format!(
                "unknown distance {other:?} (expected cosine or sq_euclidean)"
            )),
        }
    }
}

/// Hyperparameters of the ranking fits.
#[derive(Debug, Clone, PartialEq)]
pub struct RankConfig {
    pub margin: f64,
    pub negatives_per_pair: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub distance: Distance,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig {
            margin: 0.5,
            negatives_per_pair: 10,
            epochs: 50,
            learning_rate: 0.01,
            seed: 42,
            distance: Distance::Cosine,
        }
    }
}

impl RankConfig {
    pub fn validate(&self) -> Result<(), TransformError> {
        let fail = |reason: String| Err(TransformError::InvalidConfig { reason });
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be >= 0, got {}", self.margin));
        }
        if self.negatives_per_pair == 0 {
            return fail("negatives_per_pair must be >= 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }

    fn hyperparams(&self) -> Vec<(String, String)> {
        vec![
            ("margin".into(), format!("{}", self.margin)),
            ("negatives".into(), format!("{}", self.negatives_per_pair)),
            ("epochs".into(), format!("{}", self.epochs)),
            ("learning_rate".into(), format!("{}", self.learning_rate)),
            ("distance".into(), self.distance.to_string()),
        ]
    }
}

/// Σᵢ Σ_{j∈neg(i)} max(0, γ + dist(W·xsᵢ, xtᵢ) − dist(W·xsᵢ, xtⱼ)).
///
/// Negative index lists must hold valid row indices with j ≠ i.
pub fn hinge_rank_loss(
    w: &Matrix,
    seeds: &SeedMatrices,
    negatives: &[Vec<usize>],
    cfg: &RankConfig,
) -> f64 {
    assert_eq!(negatives.len(), seeds.len(), "one negative list per pair");
    let mut loss = 0.0;
    for (i, negs) in negatives.iter().enumerate() {
        let mapped = w.mul_vec(seeds.xs.row(i));
        let d_correct = cfg.distance.eval(&mapped, seeds.xt.row(i));
        for &j in negs {
            debug_assert!(j != i && j < seeds.len(), "invalid negative index");
            let d_negative = cfg.distance.eval(&mapped, seeds.xt.row(j));
            loss += (cfg.margin + d_correct - d_negative).max(0.0);
        }
    }
    loss
}

/// Uniform negatives excluding the pair's own index, k per pair.
fn sample_negatives(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            (0..k)
                .map(|_| {
                    let j = rng.random_range(0..n - 1);
                    if j >= i {
                        j + 1
                    } else {
                        j
                    }
                })
                .collect()
        })
        .collect()
}

/// One stochastic pass over the pairs in `order`: for every active hinge
/// term the matrix takes a step along -(∂dist/∂u − ∂dist/∂u_neg)·xsᵢᵀ.
fn epoch_updates(
    w: &mut Matrix,
    seeds: &SeedMatrices,
    negatives: &[Vec<usize>],
    order: &[usize],
    cfg: &RankConfig,
) {
    let d = seeds.dim();
    for &i in order {
        let xs_row = seeds.xs.row(i);
        let mapped = w.mul_vec(xs_row);
        let d_correct = cfg.distance.eval(&mapped, seeds.xt.row(i));
        let mut grad_u = vec![0.0; d];
        let mut any_active = false;
        for &j in &negatives[i] {
            let d_negative = cfg.distance.eval(&mapped, seeds.xt.row(j));
            if cfg.margin + d_correct - d_negative <= 0.0 {
                continue;
            }
            any_active = true;
            let g_pos = cfg.distance.grad_u(&mapped, seeds.xt.row(i));
            let g_neg = cfg.distance.grad_u(&mapped, seeds.xt.row(j));
            for ((g, p), q) in grad_u.iter_mut().zip(&g_pos).zip(&g_neg) {
                *g += p - q;
            }
        }
        if !any_active {
            continue;
        }
        for r in 0..d {
            let step = cfg.learning_rate * grad_u[r];
            if step == 0.0 {
                continue;
            }
            for (c, &x) in xs_row.iter().enumerate() {
                let v = w.get(r, c) - step * x;
                w.set(r, c, v);
            }
        }
    }
}

fn run_ranking(
    mut w: Matrix,
    method: Method,
    seeds: &SeedMatrices,
    cfg: &RankConfig,
    reorthogonalize: bool,
) -> Result<LinearMap, TransformError> {
    let n = seeds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trajectory = Vec::with_capacity(cfg.epochs);
    let mut initial = 0.0;
    for epoch in 0..cfg.epochs {
        let negatives = sample_negatives(&mut rng, n, cfg.negatives_per_pair);
        if epoch == 0 {
            initial = hinge_rank_loss(&w, seeds, &negatives, cfg);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        epoch_updates(&mut w, seeds, &negatives, &order, cfg);
        if reorthogonalize {
            w = orthogonal_projection(&w)?;
        }
        let loss = hinge_rank_loss(&w, seeds, &negatives, cfg);
        if !loss.is_finite() || w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(TransformError::Diverged { epoch });
        }
        trajectory.push(loss);
    }

    let final_loss = trajectory.last().copied().unwrap_or(initial);
    Ok(LinearMap::from_parts(
        w,
        method,
        FitMeta {
            pairs_used: n,
            normalization: seeds.normalization,
            objective: Some(final_loss),
            initial_objective: Some(initial),
            seed: cfg.seed,
            hyperparams: cfg.hyperparams(),
            loss_trajectory: trajectory,
        },
    ))
}

/// Nearest orthogonal matrix in Frobenius norm: the polar factor U·Vᵀ.
fn orthogonal_projection(w: &Matrix) -> Result<Matrix, TransformError> {
    let decomp = svd(w)?;
    Ok(decomp.u.matmul(&decomp.vt))
}

/// Ranking fit: starts from the closed-form MSE solution and runs seeded
/// stochastic gradient descent on the hinge ranking loss, with
/// `negatives_per_pair` fresh uniform negatives per pair each epoch.
pub fn fit_rank(seeds: &SeedMatrices, cfg: &RankConfig) -> Result<LinearMap, TransformError> {
    cfg.validate()?;
    if seeds.len() < 2 {
        return Err(TransformError::TooFewPairs {
            needed: 2,
            got: seeds.len(),
        });
    }
    let init = fit_mse(seeds)?;
    run_ranking(init.w().clone(), Method::Rank, seeds, cfg, false)
}

/// Orthogonality-constrained ranking fit: starts from the Procrustes
/// solution, applies the same ranking updates, and projects back onto the
/// orthogonal group after every epoch, so hubness shrinks while the map
/// stays angle-preserving.
pub fn fit_or_ra(seeds: &SeedMatrices, cfg: &RankConfig) -> Result<LinearMap, TransformError> {
    cfg.validate()?;
    if seeds.len() < 2 {
        return Err(TransformError::TooFewPairs {
            needed: 2,
            got: seeds.len(),
        });
    }
    check_not_degenerate(seeds, true)?;
    let init = fit_orthogonal(seeds)?;
    run_ranking(init.w().clone(), Method::OrRa, seeds, cfg, true)
}
