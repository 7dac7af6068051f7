//! Small dense linear-algebra helpers on top of nalgebra's Hermitian
//! eigensolver, exposed on ndarray storage.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

/// Eigendecomposition of a Hermitian matrix. Returns (eigenvalues ascending,
/// eigenvectors as columns).
pub fn eigh(m: &Array2<C64>) -> (Array1<f64>, Array2<C64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh expects a square matrix");
    // symmetrize to wash out roundoff asymmetry
    let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]].conj()));
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Eigendecomposition of a real symmetric matrix; eigenvalues ascending.
pub fn eigh_real(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigh_real expects a square matrix");
    let sym = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &Array2<C64>) -> f64 {
    eigh(m).0[0]
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues slightly
/// below zero from roundoff are clamped.
pub fn sqrtm_psd(m: &Array2<C64>) -> Array2<C64> {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let mut out = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        let s = vals[k].max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vecs[[i, k]] * vecs[[j, k]].conj() * s;
            }
        }
    }
    out
}

/// Conjugate-transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    let (r, c) = m.dim();
    Array2::from_shape_fn((c, r), |(i, j)| m[[j, i]].conj())
}

/// Sum over traversal of the eigenvalue square roots of `m` (used for
/// Uhlmann fidelity); `m` is Hermitian PSD up to roundoff.
pub fn trace_sqrt(m: &Array2<C64>) -> f64 {
    eigh(m).0.iter().map(|&v| v.max(0.0).sqrt()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_recovers_known_hermitian_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let m = array![[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]];
        let (vals, vecs) = eigh(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // residual ‖Mv − λv‖
        for k in 0..2 {
            for i in 0..2 {
                let mv: C64 = (0..2).map(|j| m[[i, j]] * vecs[[j, k]]).sum();
                let r = mv - vecs[[i, k]] * vals[k];
                assert!(r.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = array![[c(2.0, 0.0), c(0.5, 0.5)], [c(0.5, -0.5), c(1.0, 0.0)]];
        // make PSD: m m†
        let psd = m.dot(&dagger(&m));
        let s = sqrtm_psd(&psd);
        let back = s.dot(&s);
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[[i, j]] - psd[[i, j]]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn eigh_real_diagonal() {
        let m = array![[3.0, 0.0], [0.0, 1.0]];
        let (vals, _) = eigh_real(&m);
        assert_eq!(vals[0], 1.0);
        assert_eq!(vals[1], 3.0);
    }
}
