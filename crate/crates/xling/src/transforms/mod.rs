//! The five linear transformations that align a source embedding space to
//! a target space over a seed dictionary: least-squares (`mse`), orthogonal
//! Procrustes (`orto`), canonical correlation analysis (`cca`), max-margin
//! ranking (`rank`), and orthogonality-constrained ranking (`orra`).
//!
//! All fits return the matrix in the `W·x` convention: a source vector `x`
//! lands in the target space as `W·x`.

mod rank;

pub use rank::{fit_or_ra, fit_rank, hinge_rank_loss, Distance, RankConfig};

use std::fmt;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::dictionary::SeedMatrices;
use crate::embeddings::Normalization;
use crate::numerics::{pinv, solve_least_squares, svd, Matrix, NumericsError, DEFAULT_RCOND};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mse,
    Orto,
    Cca,
    Rank,
    OrRa,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mse,
        Method::Orto,
        Method::Cca,
        Method::Rank,
        Method::OrRa,
    ];

    /// Methods whose output is constrained to be orthogonal.
    pub fn is_orthogonal(self) -> bool {
        matches!(self, Method::Orto | Method::OrRa)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let token = match self {
            Method::Mse => "mse",
            Method::Orto => "orto",
            Method::Cca => "cca",
            Method::Rank => "rank",
            Method::OrRa => "orra",
        };
        f.write_str(token)
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mse" => Ok(Method::Mse),
            "orto" => Ok(Method::Orto),
            "cca" => Ok(Method::Cca),
            "rank" => Ok(Method::Rank),
            "orra" => Ok(Method::OrRa),
            other => Err(format!(
                "unknown method {other:?} (expected mse, orto, cca, rank or orra)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("degenerate seed matrices: {side} seed vectors are all zero")]
    DegenerateSeeds { side: &'static str },
    #[error("fit needs at least {needed} seed pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("invalid ranking config: {reason}")]
    InvalidConfig { reason: String },
    #[error("covariance block is singular with {n} pairs at dimension {d}; a ridge > 0 is required")]
    SingularCovariance { n: usize, d: usize },
    #[error("ranking fit diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    MapFormat {
        path: PathBuf,
        line: usize,
        detail: String,
    },
}

/// Fit provenance carried by every map: how many pairs were used, how the
/// inputs were normalized, the achieved objective, and the seed plus
/// hyperparameters for methods that have them.
#[derive(Debug, Clone, PartialEq)]
pub struct FitMeta {
    pub pairs_used: usize,
    pub normalization: Normalization,
    pub objective: Option<f64>,
    pub initial_objective: Option<f64>,
    pub seed: u64,
    pub hyperparams: Vec<(String, String)>,
    pub loss_trajectory: Vec<f64>,
}

impl FitMeta {
    fn closed_form(seeds: &SeedMatrices, objective: f64) -> Self {
        FitMeta {
            pairs_used: seeds.len(),
            normalization: seeds.normalization,
            objective: Some(objective),
            initial_objective: None,
            seed: 0,
            hyperparams: Vec::new(),
            loss_trajectory: Vec::new(),
        }
    }
}

/// A fitted d×d transformation together with its method tag and metadata.
#[derive(Debug, Clone)]
pub struct LinearMap {
    w: Matrix,
    method: Method,
    fit_meta: FitMeta,
}

impl LinearMap {
    pub fn from_parts(w: Matrix, method: Method, fit_meta: FitMeta) -> Self {
        assert_eq!(w.rows(), w.cols(), "transformation matrix must be square");
        LinearMap { w, method, fit_meta }
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn fit_meta(&self) -> &FitMeta {
        &self.fit_meta
    }

    /// Applies the map to a single vector: returns `W·x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w.mul_vec(x)
    }
}

/// ‖WᵀW − I‖_max, zero for a perfectly orthogonal matrix.
pub fn orthogonality_defect(w: &Matrix) -> f64 {
    w.transpose()
        .matmul(w)
        .max_abs_diff(&Matrix::identity(w.cols()))
}

/// Sum of squared residuals Σᵢ‖W·xsᵢ − xtᵢ‖² over the seed pairs.
pub fn mse_objective(w: &Matrix, seeds: &SeedMatrices) -> f64 {
    let mapped = seeds.xs.matmul(&w.transpose());
    mapped
        .sub(&seeds.xt)
        .as_slice()
        .iter()
        .map(|v| v * v)
        .sum()
}

fn check_not_degenerate(seeds: &SeedMatrices, check_target: bool) -> Result<(), TransformError> {
    if seeds.xs.max_abs() == 0.0 {
        return Err(TransformError::DegenerateSeeds { side: "source" });
    }
    if check_target && seeds.xt.max_abs() == 0.0 {
        return Err(TransformError::DegenerateSeeds { side: "target" });
    }
    Ok(())
}

/// Unconstrained least-squares fit: W = argmin Σᵢ‖W·xsᵢ − xtᵢ‖², solved in
/// closed form.
pub fn fit_mse(seeds: &SeedMatrices) -> Result<LinearMap, TransformError> {
    if seeds.is_empty() {
        return Err(TransformError::TooFewPairs {
            needed: 1,
            got: 0,
        });
    }
    check_not_degenerate(seeds, false)?;
    // Row convention: xs·X ≈ xt, then W = Xᵀ puts the map in W·x form.
    let x = solve_least_squares(&seeds.xs, &seeds.xt)?;
    let w = x.transpose();
    let objective = mse_objective(&w, seeds);
    Ok(LinearMap::from_parts(
        w,
        Method::Mse,
        FitMeta::closed_form(seeds, objective),
    ))
}

/// Orthogonal Procrustes fit: the residual objective of [`fit_mse`] is
/// minimized subject to WᵀW = I, in closed form through the SVD of
/// M = xtᵀ·xs as W = U·Vᵀ.
pub fn fit_orthogonal(seeds: &SeedMatrices) -> Result<LinearMap, TransformError> {
    if seeds.is_empty() {
        return Err(TransformError::TooFewPairs {
            needed: 1,
            got: 0,
        });
    }
    check_not_degenerate(seeds, true)?;
    let m = seeds.xt.transpose().matmul(&seeds.xs);
    let decomp = svd(&m)?;
    let w = decomp.u.matmul(&decomp.vt);
    let objective = mse_objective(&w, seeds);
    Ok(LinearMap::from_parts(
        w,
        Method::Orto,
        FitMeta::closed_form(seeds, objective),
    ))
}

/// Projections to the shared CCA space and the canonical correlations.
#[derive(Debug, Clone)]
pub struct CcaFactors {
    /// Source-to-shared projection (applied as W·x to centered vectors).
    pub w_s_o: Matrix,
    /// Target-to-shared projection.
    pub w_t_o: Matrix,
    /// Canonical correlations, descending.
    pub correlations: Vec<f64>,
}

/// Ridge used when the caller does not supply one: 1e-8·trace(C)/d over the
/// larger covariance block, small enough not to perturb well-conditioned
/// problems.
pub fn cca_auto_ridge(seeds: &SeedMatrices) -> f64 {
    let n = seeds.len();
    let d = seeds.dim();
    if n < 2 || d == 0 {
        return 0.0;
    }
    let denom = (n - 1) as f64;
    let trace = |m: &Matrix| -> f64 {
        let centered = center_columns(m);
        (0..d)
            .map(|j| (0..n).map(|i| centered.get(i, j).powi(2)).sum::<f64>() / denom)
            .sum()
    };
    1e-8 * trace(&seeds.xs).max(trace(&seeds.xt)) / d as f64
}

/// CCA alignment: both spaces are centered and whitened, canonical
/// directions come from the SVD of the whitened cross-covariance, and the
/// direct source-to-target map is composed as pinv(Wᵗ°)·Wˢ°. All d
/// components are kept.
pub fn fit_cca(
    seeds: &SeedMatrices,
    ridge: f64,
) -> Result<(LinearMap, CcaFactors), TransformError> {
    let n = seeds.len();
    let d = seeds.dim();
    if n < 2 {
        return Err(TransformError::TooFewPairs { needed: 2, got: n });
    }
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(TransformError::InvalidConfig {
            reason: format!("cca ridge must be a finite non-negative value, got {ridge}"),
        });
    }
    if ridge == 0.0 && n <= d {
        return Err(TransformError::SingularCovariance { n, d });
    }

    let cs = center_columns(&seeds.xs);
    let ct = center_columns(&seeds.xt);
    let denom = 1.0 / (n - 1) as f64;
    let mut c_ss = cs.transpose().matmul(&cs).scale(denom);
    let mut c_tt = ct.transpose().matmul(&ct).scale(denom);
    let c_st = cs.transpose().matmul(&ct).scale(denom);
    for i in 0..d {
        c_ss.set(i, i, c_ss.get(i, i) + ridge);
        c_tt.set(i, i, c_tt.get(i, i) + ridge);
    }

    let ss_inv_sqrt = inv_sqrt_sym_psd(&c_ss, n, d)?;
    let tt_inv_sqrt = inv_sqrt_sym_psd(&c_tt, n, d)?;
    let k = ss_inv_sqrt.matmul(&c_st).matmul(&tt_inv_sqrt);
    let decomp = svd(&k)?;

    let w_s_o = decomp.u.transpose().matmul(&ss_inv_sqrt);
    let w_t_o = decomp.vt.matmul(&tt_inv_sqrt);
    let w = pinv(&w_t_o, DEFAULT_RCOND)?.matmul(&w_s_o);
    let objective = mse_objective(&w, seeds);

    let mut meta = FitMeta::closed_form(seeds, objective);
    meta.hyperparams = vec![("ridge".into(), format!("{ridge}"))];
    Ok((
        LinearMap::from_parts(w, Method::Cca, meta),
        CcaFactors {
            w_s_o,
            w_t_o,
            correlations: decomp.singular_values,
        },
    ))
}

fn center_columns(m: &Matrix) -> Matrix {
    let rows = m.rows();
    let cols = m.cols();
    let mut means = vec![0.0; cols];
    for i in 0..rows {
        for (mean, v) in means.iter_mut().zip(m.row(i)) {
            *mean += v;
        }
    }
    for mean in &mut means {
        *mean /= rows as f64;
    }
    Matrix::from_fn(rows, cols, |i, j| m.get(i, j) - means[j])
}

/// Inverse square root of a symmetric positive-definite matrix via its SVD
/// (which coincides with its eigen-decomposition).
fn inv_sqrt_sym_psd(c: &Matrix, n: usize, d: usize) -> Result<Matrix, TransformError> {
    let decomp = svd(c)?;
    let sigma_max = decomp.singular_values.first().copied().unwrap_or(0.0);
    let mut scaled = Matrix::zeros(d, d);
    for i in 0..d {
        let s = decomp.singular_values[i];
        if s <= sigma_max * 1e-14 || s == 0.0 {
            return Err(TransformError::SingularCovariance { n, d });
        }
        let inv_sqrt = 1.0 / s.sqrt();
        for j in 0..d {
            scaled.set(i, j, inv_sqrt * decomp.u.get(j, i));
        }
    }
    Ok(decomp.u.matmul(&scaled))
}

/// Dispatches to the fit for `method`. `cca_ridge` of None uses the
/// data-driven default; the rank config only matters for the two ranking
/// methods.
pub fn fit_transform(
    method: Method,
    seeds: &SeedMatrices,
    rank_cfg: &RankConfig,
    cca_ridge: Option<f64>,
) -> Result<LinearMap, TransformError> {
    match method {
        Method::Mse => fit_mse(seeds),
        Method::Orto => fit_orthogonal(seeds),
        Method::Cca => {
            let ridge = cca_ridge.unwrap_or_else(|| cca_auto_ridge(seeds));
            fit_cca(seeds, ridge).map(|(map, _)| map)
        }
        Method::Rank => fit_rank(seeds, rank_cfg),
        Method::OrRa => fit_or_ra(seeds, rank_cfg),
    }
}

/// Writes a map as text: a "<method> <d> <seed> <normalization>" header,
/// then d rows of d values in round-trip-exact decimal form.
pub fn save_map(map: &LinearMap, path: impl AsRef<Path>) -> Result<(), TransformError> {
    let path = path.as_ref();
    let io_err = |source| TransformError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = io::BufWriter::new(file);
    writeln!(
        out,
        "{} {} {} {}",
        map.method,
        map.dim(),
        map.fit_meta.seed,
        map.fit_meta.normalization
    )
    .map_err(io_err)?;
    for i in 0..map.dim() {
        let row: Vec<String> = map.w.row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(" ")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads a map written by [`save_map`], re-checking the orthogonality
/// invariant for the constrained methods.
pub fn load_map(path: impl AsRef<Path>) -> Result<LinearMap, TransformError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| TransformError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    let format_err = |line: usize, detail: String| TransformError::MapFormat {
        path: path.to_path_buf(),
        line,
        detail,
    };

    let mut lines = content.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(1, "empty map file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(format_err(
            1,
            format!("expected \"<method> <dim> <seed> <normalization>\", got {header:?}"),
        ));
    }
    let method: Method = fields[0].parse().map_err(|e| format_err(1, e))?;
    let dim: usize = fields[1]
        .parse()
        .map_err(|_| format_err(1, format!("bad dimension {:?}", fields[1])))?;
    let seed: u64 = fields[2]
        .parse()
        .map_err(|_| format_err(1, format!("bad seed {:?}", fields[2])))?;
    let normalization: Normalization = fields[3].parse().map_err(|e| format_err(1, e))?;
    if dim == 0 {
        return Err(format_err(1, "map dimension must be positive".into()));
    }

    let mut data = Vec::with_capacity(dim * dim);
    let mut rows_read = 0usize;
    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        if line.is_empty() {
            continue;
        }
        rows_read += 1;
        if rows_read > dim {
            return Err(format_err(line_no, format!("more than {dim} rows")));
        }
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != dim {
            return Err(format_err(
                line_no,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        for token in values {
            let value: f64 = token
                .parse()
                .map_err(|_| format_err(line_no, format!("{token:?} is not a number")))?;
            if !value.is_finite() {
                return Err(format_err(line_no, format!("{token:?} is not finite")));
            }
            data.push(value);
        }
    }
    if rows_read != dim {
        return Err(format_err(
            rows_read + 1,
            format!("expected {dim} rows, found {rows_read}"),
        ));
    }

    let w = Matrix::new(dim, dim, data).expect("entries validated above");
    if method.is_orthogonal() {
        let defect = orthogonality_defect(&w);
        if defect > 1e-6 {
            return Err(format_err(
                1,
                format!("{method} map violates orthogonality (defect {defect:.3e})"),
            ));
        }
    }
    Ok(LinearMap {
        w,
        method,
        fit_meta: FitMeta {
            pairs_used: 0,
            normalization,
            objective: None,
            initial_objective: None,
            seed,
            hyperparams: Vec::new(),
            loss_trajectory: Vec::new(),
        },
    })
}
