//! Lawson-Hanson active-set solver for nonnegative least squares.

use nalgebra::{DMatrix, DVector};

/// Solves `min ||A w - b||` subject to `w >= 0`, given the Gram matrix
/// `A^T A` and `A^T b`.
pub fn nnls(gram: &DMatrix<f64>, atb: &DVector<f64>) -> DVector<f64> {
    let n = atb.len();
    let scale = gram.diagonal().amax().max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale * atb.amax().max(1.0);
    let mut w = DVector::zeros(n);
    let mut passive = vec![false; n];

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| gram[(idx[i], idx[j])]);
        let rhs = DVector::from_fn(idx.len(), |i, _| atb[idx[i]]);
        let sol = sub
            .clone()
            .cholesky()
            .map(|c| c.solve(&rhs))
            .or_else(|| sub.lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(idx.len()));
        let mut full = DVector::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            full[i] = sol[k];
        }
        full
    };

    for _ in 0..3 * n + 10 {
        let grad = atb - gram * &w;
        let candidate = (0..n)
            .filter(|&i| !passive[i] && grad[i] > tol)
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let s = solve_passive(&passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                w = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                alpha = alpha.min(w[i] / (w[i] - s[i]));
            }
            w += (s - &w) * alpha;
            for i in 0..n {
                if passive[i] && w[i] <= tol / scale {
                    passive[i] = false;
                    w[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    w
}
