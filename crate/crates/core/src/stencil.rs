//! Finite-difference weights on arbitrary nodes and a tridiagonal solver.

use num_complex::Complex64;

/// Fornberg weights: coefficients of the `k`-th derivative at `z` for each
/// node in `x`, for every k = 0..=m. Returned as `w[j]` = weights of node j,
/// `w[j][k]` = weight in the k-th derivative. Nodes need not be uniform.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    assert!(n > m, "need at least m+1 nodes for the m-th derivative");
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights of the `k`-th derivative only, at `z`, over the nodes `x`.
pub fn deriv_weights(z: f64, x: &[f64], k: usize) -> Vec<f64> {
    fd_weights(z, x, k).into_iter().map(|row| row[k]).collect()
}

/// Solves a real tridiagonal system with complex right-hand side in place.
///
/// `lower[i]` multiplies x[i-1] in row i (lower[0] unused), `diag[i]` is the
/// diagonal, `upper[i]` multiplies x[i+1] (upper[n-1] unused). Returns false
/// if a pivot degenerates.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [Complex64],
    scratch: &mut Vec<f64>,
) -> bool {
    let n = diag.len();
    debug_assert_eq!(lower.len(), n);
    debug_assert_eq!(upper.len(), n);
    debug_assert_eq!(rhs.len(), n);
    scratch.clear();
    scratch.resize(n, 0.0);

    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return false;
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return false;
        }
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - lower[i] * prev) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
    true
}
