//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Singular values below `RANK_RTOL * largest` are treated as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Columns of `x` listed in `idx`, in that order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), idx.len());
    for (k, &j) in idx.iter().enumerate() {
        out.set_column(k, &x.column(j));
    }
    out
}

/// Empirical Gram matrix `E_n[x_i x_i']`.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    x.tr_mul(x) / n
}

/// Principal submatrix of a square matrix.
pub fn principal_submatrix(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])])
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn sym_extreme_eigs(m: &DMatrix<f64>) -> (f64, f64) {
    match m.nrows() {
        0 => (f64::INFINITY, f64::NEG_INFINITY),
        1 => (m[(0, 0)], m[(0, 0)]),
        2 => {
            let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            (mid - rad, mid + rad)
        }
        _ => {
            let ev = m.clone().symmetric_eigenvalues();
            (ev.min(), ev.max())
        }
    }
}

/// Minimum-norm least-squares solution of `a * beta ≈ b`.
///
/// Returns the coefficients and whether `a` was found to be rank-deficient.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    let k = a.ncols();
    if k == 0 {
        return (DVector::zeros(0), false);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return (DVector::zeros(k), true);
    }
    let eps = RANK_RTOL * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let beta = svd
        .solve(b, eps)
        .expect("both singular vector sets were requested");
    (beta, rank < k)
}
