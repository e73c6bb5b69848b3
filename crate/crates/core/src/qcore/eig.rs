//! Cyclic Jacobi eigensolver for small dense complex Hermitian matrices.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

const MAX_SWEEPS: usize = 60;

/// Eigen-decomposition of a Hermitian matrix given as a raw `DMatrix`.
///
/// Only the Hermitian part of `a` is used. Returns eigenvalues in descending
/// order and the matching orthonormal eigenvectors as columns.
pub fn eigh(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh: matrix must be square");
    // column-major working copies, hermitized
    let mut m: Vec<C64> = vec![C64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            m[i + j * n] = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
        }
    }
    let mut v: Vec<C64> = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i + i * n] = C64::new(1.0, 0.0);
    }

    let scale: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale > 0.0 {
        let target = (4.0 * f64::EPSILON * scale).powi(2);
        for _sweep in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for q in 1..n {
                for p in 0..q {
                    off += m[p + q * n].norm_sqr();
                }
            }
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, n, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[i + i * n].re).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, k| v[i + order[k] * n]);
    (values, vectors)
}

/// One Jacobi rotation annihilating the (p, q) element.
#[inline]
fn rotate(m: &mut [C64], v: &mut [C64], n: usize, p: usize, q: usize) {
    let g = m[p + q * n];
    let r = g.norm();
    if r == 0.0 {
        return;
    }
    let app = m[p + p * n].re;
    let aqq = m[q + q * n].re;
    if r < 1e-300 || r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m[p + q * n] = C64::new(0.0, 0.0);
        m[q + p * n] = C64::new(0.0, 0.0);
        return;
    }
    let e = g / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ec = e.conj();

    // A <- A J  (columns p, q)
    for i in 0..n {
        let aip = m[i + p * n];
        let aiq = m[i + q * n];
        m[i + p * n] = aip * c - aiq * (ec * s);
        m[i + q * n] = aip * s + aiq * (ec * c);
    }
    // A <- J^H A  (rows p, q)
    for j in 0..n {
        let apj = m[p + j * n];
        let aqj = m[q + j * n];
        m[p + j * n] = apj * c - aqj * (e * s);
        m[q + j * n] = apj * s + aqj * (e * c);
    }
    m[p + q * n] = C64::new(0.0, 0.0);
    m[q + p * n] = C64::new(0.0, 0.0);
    m[p + p * n].im = 0.0;
    m[q + q * n].im = 0.0;
    // V <- V J
    for i in 0..n {
        let vip = v[i + p * n];
        let viq = v[i + q * n];
        v[i + p * n] = vip * c - viq * (ec * s);
        v[i + q * n] = vip * s + viq * (ec * c);
    }
}
