//! Synthesis of representative tensors from tracked statistics.
//!
//! Inputs:  `T' = 1_B mu^T + Z L^T` with `L L^T = Sigma + eps I`.
//! Weights: `W' = mean + L_U Z L_V^T` with jittered factors of U and V.
//!
//! Both draws preserve the tracked second-order structure (feature
//! covariance for inputs, row and column covariance for weights) and are
//! deterministic for a fixed [`Rng`] seed.

use crate::error::Result;
use crate::linalg::{cholesky_jittered, matmul};
use crate::matnormal::WeightStats;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::welford::InputStats;

/// Draws `batch` activation rows from the tracked input distribution.
pub fn sample_input(stats: &InputStats, batch: usize, rng: &mut Rng) -> Result<Matrix<f32>> {
    let sigma = stats.covariance()?;
    let factor = cholesky_jittered(&sigma, crate::matnormal::DEFAULT_EPSILON_REL)?;
    Ok(sample_gaussian_rows(stats.mean(), &factor, batch, rng))
}

/// Same draw from an explicit mean and pre-factored covariance; used when
/// the covariance factor is reused across many batches.
pub fn sample_gaussian_rows(
    mean: &[f64],
    chol_factor: &Matrix<f64>,
    batch: usize,
    rng: &mut Rng,
) -> Matrix<f32> {
    let k = mean.len();
    debug_assert_eq!(chol_factor.shape(), (k, k));
    let mut out = Matrix::<f32>::zeros(batch, k);
    let mut row_z = vec![0.0f64; k];
    for b in 0..batch {
        for z in row_z.iter_mut() {
            *z = rng.standard_normal();
        }
        let out_row = out.row_mut(b);
        // x = mu + L z, exploiting the lower-triangular structure
        for (i, slot) in out_row.iter_mut().enumerate() {
            let mut acc = mean[i];
            let l_row = chol_factor.row(i);
            for (lij, zj) in l_row[..=i].iter().zip(&row_z[..=i]) {
                acc += lij * zj;
            }
            *slot = acc as f32;
        }
    }
    out
}

/// Draws one weight matrix from the tracked matrix-normal distribution.
pub fn sample_weight(stats: &WeightStats, rng: &mut Rng) -> Result<Matrix<f32>> {
    let (m, n) = stats.shape();
    let l_u = cholesky_jittered(stats.row_cov(), stats.epsilon_rel())?;
    let l_v = cholesky_jittered(stats.col_cov(), stats.epsilon_rel())?;
    let z = rng.normal_matrix_f64(m, n);
    // W' = mean + L_U Z L_V^T
    let lz = matmul(&l_u, &z);
    let lzv = matmul(&lz, &l_v.transpose());
    let mean = stats.mean();
    Ok(Matrix::from_fn(m, n, |i, j| {
        (mean[(i, j)] + lzv[(i, j)]) as f32
    }))
}
