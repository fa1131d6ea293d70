use super::matrix::{dot, Matrix};
use super::NumericsError;

/// Thin singular value decomposition `A = U · diag(σ) · Vᵀ`.
///
/// `u` is m×r and `vt` is r×n with r = min(m, n); singular values are
/// sorted descending. The sign of each left singular vector is fixed so
/// that its largest-magnitude entry is positive, which makes the
/// factorization reproducible bit-for-bit across runs.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    /// Reassembles `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let r = self.singular_values.len();
        let mut scaled = Matrix::zeros(r, self.vt.cols());
        for i in 0..r {
            let s = self.singular_values[i];
            for j in 0..self.vt.cols() {
                scaled.set(i, j, s * self.vt.get(i, j));
            }
        }
        self.u.matmul(&scaled)
    }
}

const MAX_SWEEPS: usize = 100;
const ROTATION_TOL: f64 = 1e-12;

/// Relative cutoff used by default when a pseudo-inverse is taken on
/// behalf of another operation.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// One-sided Jacobi SVD.
///
/// Columns of the input are orthogonalized by plane rotations applied in a
/// fixed cyclic order; convergence is declared when every column pair
/// satisfies |aₚ·a_q| ≤ 1e-12·‖aₚ‖‖a_q‖. Wide inputs are factorized through
/// their transpose. Adequate for the dimensions this crate works at
/// (d ≤ 300 direct, larger systems go through d×d Gram matrices).
pub fn svd(a: &Matrix) -> Result<SvdResult, NumericsError> {
    if a.is_empty() {
        return Err(NumericsError::Empty);
    }
    let mut result = if a.rows() >= a.cols() {
        jacobi_tall(a)?
    } else {
        let wide = jacobi_tall(&a.transpose())?;
        SvdResult {
            u: wide.vt.transpose(),
            singular_values: wide.singular_values,
            vt: wide.u.transpose(),
        }
    };
    fix_signs(&mut result);
    Ok(result)
}

/// Jacobi SVD of a tall (rows ≥ cols) matrix, before sign normalization.
fn jacobi_tall(a: &Matrix) -> Result<SvdResult, NumericsError> {
    let m = a.rows();
    let n = a.cols();
    // Work on the transpose so each column of `a` is a contiguous row.
    let mut work = a.transpose();
    let mut vt = Matrix::identity(n);

    let mut converged = false;
    let mut sweeps_used = 0;
    for _ in 0..MAX_SWEEPS {
        sweeps_used += 1;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let alpha = dot(work.row(p), work.row(p));
                let beta = dot(work.row(q), work.row(q));
                let gamma = dot(work.row(p), work.row(q));
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut work, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    if !converged {
        let (max_off_diag, condition_estimate) = convergence_diagnostics(&work);
        return Err(NumericsError::NoConvergence {
            sweeps: sweeps_used,
            max_off_diag,
            condition_estimate,
        });
    }

    // Norms of the orthogonalized columns are the singular values.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|i| dot(work.row(i), work.row(i)).sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let mut u = Matrix::zeros(m, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut vt_sorted = Matrix::zeros(n, n);
    let mut zero_columns = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singular_values.push(sigma);
        vt_sorted.row_mut(dst).copy_from_slice(vt.row(src));
        if sigma > 0.0 {
            for r in 0..m {
                u.set(r, dst, work.get(src, r) / sigma);
            }
        } else {
            zero_columns.push(dst);
        }
    }
    complete_basis(&mut u, &zero_columns);

    Ok(SvdResult {
        u,
        singular_values,
        vt: vt_sorted,
    })
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    for k in 0..cols {
        let vp = m.get(p, k);
        let vq = m.get(q, k);
        m.set(p, k, c * vp - s * vq);
        m.set(q, k, s * vp + c * vq);
    }
}

fn convergence_diagnostics(work: &Matrix) -> (f64, f64) {
    let n = work.rows();
    let norms: Vec<f64> = (0..n).map(|i| dot(work.row(i), work.row(i)).sqrt()).collect();
    let mut max_off = 0.0f64;
    for p in 0..n.saturating_sub(1) {
        for q in (p + 1)..n {
            let scale = norms[p] * norms[q];
            if scale > 0.0 {
                max_off = max_off.max(dot(work.row(p), work.row(q)).abs() / scale);
            }
        }
    }
    let max_norm = norms.iter().cloned().fold(0.0f64, f64::max);
    let min_norm = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min_norm > 0.0 {
        max_norm / min_norm
    } else {
        f64::INFINITY
    };
    (max_off, cond)
}

/// Fills columns listed in `zero_columns` with an orthonormal completion,
/// chosen deterministically from the standard basis.
fn complete_basis(u: &mut Matrix, zero_columns: &[usize]) {
    let m = u.rows();
    let n = u.cols();
    for &col in zero_columns {
        let mut chosen = None;
        for candidate in 0..m {
            let mut v = vec![0.0; m];
            v[candidate] = 1.0;
            for other in 0..n {
                if other == col {
                    continue;
                }
                let proj: f64 = (0..m).map(|r| u.get(r, other) * v[r]).sum();
                if proj != 0.0 {
                    for (r, entry) in v.iter_mut().enumerate() {
                        *entry -= proj * u.get(r, other);
                    }
                }
            }
            let residual = dot(&v, &v).sqrt();
            if residual > 0.5 {
                for (r, entry) in v.iter().enumerate() {
                    u.set(r, col, entry / residual);
                }
                chosen = Some(candidate);
                break;
            }
        }
        debug_assert!(chosen.is_some(), "basis completion exhausted candidates");
    }
}

/// Largest-magnitude entry of every left singular vector is made positive;
/// the paired row of vt flips with it so the product is unchanged.
fn fix_signs(svd: &mut SvdResult) {
    let m = svd.u.rows();
    let r = svd.singular_values.len();
    for j in 0..r {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..m {
            let a = svd.u.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if svd.u.get(best, j) < 0.0 {
            for i in 0..m {
                let v = svd.u.get(i, j);
                svd.u.set(i, j, -v);
            }
            for k in 0..svd.vt.cols() {
                let v = svd.vt.get(j, k);
                svd.vt.set(j, k, -v);
            }
        }
    }
}

/// Moore–Penrose pseudo-inverse, truncating singular values below
/// `rcond · σ_max`.
pub fn pinv(a: &Matrix, rcond: f64) -> Result<Matrix, NumericsError> {
    let decomp = svd(a)?;
    let sigma_max = decomp.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = rcond * sigma_max;
    let r = decomp.singular_values.len();
    // V · diag(hσ) · Uᵀ with hσ_i = 1/σ_i above the cutoff, 0 below.
    let mut scaled_ut = Matrix::zeros(r, decomp.u.rows());
    for i in 0..r {
        let s = decomp.singular_values[i];
        if s > cutoff && s > 0.0 {
            let inv = 1.0 / s;
            for j in 0..decomp.u.rows() {
                scaled_ut.set(i, j, inv * decomp.u.get(j, i));
            }
        }
    }
    Ok(decomp.vt.transpose().matmul(&scaled_ut))
}

/// Least-squares solve: returns the X minimizing ‖A·X − B‖_F, the
/// minimum-norm solution when A is rank-deficient.
///
/// Overdetermined systems are reduced through the Gram matrix AᵀA, which
/// keeps the decomposition at p×p no matter how many rows A has; this is
/// the path the transformation fits rely on for 20k-pair seed systems.
pub fn solve_least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericsError> {
    if a.is_empty() || b.is_empty() {
        return Err(NumericsError::Empty);
    }
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch {
            op: "solve_least_squares",
            lhs: (a.rows(), a.cols()),
            rhs: (b.rows(), b.cols()),
        });
    }
    if a.rows() > a.cols() {
        // A⁺ = (AᵀA)⁺ Aᵀ
        let at = a.transpose();
        let gram = at.matmul(a);
        let rhs = at.matmul(b);
        Ok(pinv(&gram, DEFAULT_RCOND)?.matmul(&rhs))
    } else {
        Ok(pinv(a, DEFAULT_RCOND)?.matmul(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let result = svd(&Matrix::identity(3)).unwrap();
        for &s in &result.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(result.reconstruct().max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn diagonal_singular_values_are_entries() {
        let a = mat(3, 3, &[3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        let result = svd(&a).unwrap();
        assert!((result.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((result.singular_values[1] - 2.0).abs() < 1e-12);
        assert!((result.singular_values[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_completes_orthonormal_u() {
        // Two identical columns: rank 1, one exact zero singular value.
        let a = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let result = svd(&a).unwrap();
        assert!((result.singular_values[0] - 2.0).abs() < 1e-12);
        assert!(result.singular_values[1].abs() < 1e-12);
        let utu = result.u.transpose().matmul(&result.u);
        assert!(utu.max_abs_diff(&Matrix::identity(2)) < 1e-10);
        assert!(result.reconstruct().max_abs_diff(&a) < 1e-10);
    }

    #[test]
    fn wide_matrix_reconstructs() {
        let a = mat(2, 4, &[1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.0, -3.0]);
        let result = svd(&a).unwrap();
        assert_eq!(result.u.rows(), 2);
        assert_eq!(result.vt.cols(), 4);
        assert!(result.reconstruct().max_abs_diff(&a) < 1e-10);
        let vvt = result.vt.matmul(&result.vt.transpose());
        assert!(vvt.max_abs_diff(&Matrix::identity(2)) < 1e-10);
    }

    #[test]
    fn svd_is_deterministic() {
        let a = mat(3, 2, &[0.3, -1.2, 2.2, 0.7, -0.9, 1.5]);
        let first = svd(&a).unwrap();
        let second = svd(&a).unwrap();
        assert_eq!(first.u, second.u);
        assert_eq!(first.vt, second.vt);
        assert_eq!(first.singular_values, second.singular_values);
    }

    #[test]
    fn svd_rejects_empty() {
        assert!(matches!(
            svd(&Matrix::zeros(0, 3)),
            Err(NumericsError::Empty)
        ));
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let p = pinv(&Matrix::identity(4), 1e-12).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(4)) < 1e-12);
    }

    #[test]
    fn pinv_truncates_zero_singular_values() {
        let a = mat(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = pinv(&a, 1e-12).unwrap();
        let expected = mat(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!(p.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn least_squares_identity_design_returns_rhs() {
        let b = mat(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_least_squares(&Matrix::identity(3), &b).unwrap();
        assert!(x.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn least_squares_consistent_overdetermined_has_zero_residual() {
        // b lives exactly in the column span of a.
        let a = mat(6, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0, 0.5, 0.5, -1.0, 2.0]);
        let truth = mat(2, 1, &[1.5, -2.0]);
        let b = a.matmul(&truth);
        let x = solve_least_squares(&a, &b).unwrap();
        let residual = a.matmul(&x).sub(&b).frobenius_norm();
        assert!(residual < 1e-10, "residual {residual}");
    }

    #[test]
    fn least_squares_rejects_row_mismatch() {
        let a = Matrix::identity(3);
        let b = mat(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            solve_least_squares(&a, &b),
            Err(NumericsError::DimensionMismatch { .. })
        ));
    }
}
