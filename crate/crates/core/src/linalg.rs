//! Small dense linear algebra in `f64`: jittered Cholesky factorization,
//! triangular solves and a few products used by the statistics trackers.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How many times the jitter is escalated (x10 each time) before giving up.
pub const JITTER_ESCALATIONS: u32 = 4;

/// Lower Cholesky factor of `a + eps*I` with `eps = epsilon_rel * trace(a) / dim`.
///
/// The input is symmetrized first. If factorization fails, `eps` is escalated
/// by x10 up to [`JITTER_ESCALATIONS`] times before reporting
/// `NotPositiveDefinite`. A non-positive trace falls back to `epsilon_rel`
/// itself as the absolute jitter so degenerate (all-zero) matrices still
/// factor.
pub fn cholesky_jittered(a: &Matrix<f64>, epsilon_rel: f64) -> Result<Matrix<f64>> {
    if a.rows() != a.cols() {
        return Err(Error::shape(
            "cholesky_jittered",
            "square matrix",
            format!("{:?}", a.shape()),
        ));
    }
    let n = a.rows();
    let sym = symmetrize(a);
    let trace = sym.trace();
    let base_eps = if trace > 0.0 {
        epsilon_rel * trace / n as f64
    } else {
        epsilon_rel
    };

    let mut eps = base_eps;
    for _ in 0..=JITTER_ESCALATIONS {
        let mut jittered = sym.clone();
        for i in 0..n {
            jittered[(i, i)] += eps;
        }
        if let Some(l) = cholesky(&jittered) {
            return Ok(l);
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        dim: n,
        attempts: JITTER_ESCALATIONS,
    })
}

/// Plain lower Cholesky; `None` on a non-positive or non-finite pivot.
pub fn cholesky(a: &Matrix<f64>) -> Option<Matrix<f64>> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut l = Matrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// `(a + a^T) / 2`.
pub fn symmetrize(a: &Matrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

/// Solves `L X = B` for X with lower-triangular L (forward substitution,
/// column by column of B).
pub fn solve_lower(l: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let n = l.rows();
    debug_assert_eq!(n, b.rows());
    let cols = b.cols();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            for c in 0..cols {
                let sub = lik * x[(k, c)];
                x[(i, c)] -= sub;
            }
        }
        let d = l[(i, i)];
        for c in 0..cols {
            x[(i, c)] /= d;
        }
    }
    x
}

/// Solves `X L^T = B` for X, i.e. `X = B L^{-T}`.
pub fn solve_lower_transpose_right(l: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    // X L^T = B  <=>  L X^T = B^T
    solve_lower(l, &b.transpose()).transpose()
}

/// `a . b` in f64.
pub fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let (p, q) = a.shape();
    let r = b.cols();
    debug_assert_eq!(q, b.rows());
    let mut out = Matrix::<f64>::zeros(p, r);
    for i in 0..p {
        for k in 0..q {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..r {
                let add = aik * b[(k, j)];
                out[(i, j)] += add;
            }
        }
    }
    out
}

/// `a . b^T` in f64.
pub fn matmul_nt(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let (p, q) = a.shape();
    debug_assert_eq!(q, b.cols());
    let n = b.rows();
    Matrix::from_fn(p, n, |i, j| {
        let ra = a.row(i);
        let rb = b.row(j);
        ra.iter().zip(rb).map(|(x, y)| x * y).sum()
    })
}

/// `a^T . a` scaled by `alpha` (Gram matrix in f64).
pub fn gram_tn(a: &Matrix<f64>, alpha: f64) -> Matrix<f64> {
    let (rows, cols) = a.shape();
    let mut out = Matrix::<f64>::zeros(cols, cols);
    for r in 0..rows {
        let row = a.row(r);
        for i in 0..cols {
            let ai = row[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..cols {
                let add = ai * row[j];
                out[(i, j)] += add;
            }
        }
    }
    for v in out.as_mut_slice() {
        *v *= alpha;
    }
    out
}

/// Kronecker product `a (x) b`; test-scale sizes only.
pub fn kron(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let (am, an) = a.shape();
    let (bm, bn) = b.shape();
    Matrix::from_fn(am * bm, an * bn, |i, j| {
        a[(i / bm, j / bn)] * b[(i % bm, j % bn)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn identity_factor_includes_jitter() {
        let eye = Matrix::<f64>::identity(4);
        let l = cholesky_jittered(&eye, 1e-6).unwrap();
        let expect = (1.0f64 + 1e-6).sqrt();
        for i in 0..4 {
            assert!((l[(i, i)] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_factor_in_zero_jitter_limit() {
        let a = Matrix::from_vec(2, 2, vec![4.0f64, 0.0, 0.0, 9.0]);
        let l = cholesky_jittered(&a, 0.0).unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 1)], 3.0);
        assert_eq!(l[(1, 0)], 0.0);
    }

    #[test]
    fn random_spd_reconstruction() {
        let mut rng = Rng::from_seed(3);
        let g = rng.normal_matrix_f64(16, 16);
        let a = matmul_nt(&g, &g); // SPD with probability 1
        let l = cholesky_jittered(&a, 1e-6).unwrap();
        let back = matmul_nt(&l, &l);
        // reconstruct a + eps*I
        let eps = 1e-6 * a.trace() / 16.0;
        let mut target = a.clone();
        for i in 0..16 {
            target[(i, i)] += eps;
        }
        assert!(
            back.rel_frob_dist(&target) < 1e-5,
            "dist {}",
            back.rel_frob_dist(&target)
        );
    }

    #[test]
    fn indefinite_matrix_fails_after_escalation() {
        let a = Matrix::from_vec(2, 2, vec![1.0f64, 0.0, 0.0, -1.0]);
        match cholesky_jittered(&a, 1e-6) {
            Err(Error::NotPositiveDefinite { dim: 2, .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_factors_via_absolute_fallback() {
        let a = Matrix::<f64>::zeros(3, 3);
        let l = cholesky_jittered(&a, 1e-6).unwrap();
        for i in 0..3 {
            assert!((l[(i, i)] - 1e-3).abs() < 1e-9, "sqrt(1e-6) diagonal");
        }
    }

    #[test]
    fn solves_invert_triangular_products() {
        let mut rng = Rng::from_seed(17);
        let g = rng.normal_matrix_f64(6, 6);
        let a = matmul_nt(&g, &g);
        let l = cholesky_jittered(&a, 1e-9).unwrap();
        let b = rng.normal_matrix_f64(6, 4);
        let x = solve_lower(&l, &b);
        let back = matmul(&l, &x);
        assert!(back.rel_frob_dist(&b) < 1e-9);

        let c = rng.normal_matrix_f64(4, 6);
        let y = solve_lower_transpose_right(&l, &c);
        let back2 = matmul(&y, &l.transpose());
        assert!(back2.rel_frob_dist(&c) < 1e-9);
    }

    #[test]
    fn kron_small_case() {
        let a = Matrix::from_vec(2, 2, vec![1.0f64, 2.0, 3.0, 4.0]);
        let b = Matrix::<f64>::identity(2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(2, 0)], 3.0);
        assert_eq!(k[(1, 3)], 2.0);
        assert_eq!(k[(0, 1)], 0.0);
    }
}
