//! Streaming mean/covariance tracking for activations.
//!
//! Batches are merged with the batched Welford update. For a batch
//! `X (B,K)` with batch mean `mu_b` and centered scatter `S_b`:
//!
//! ```text
//! n_new = n_old + B
//! delta = mu_b - mu_old
//! mu_new = mu_old + (B / n_new) delta
//! S_new  = S_old + S_b + (n_old B / n_new) delta delta^T
//! ```
//!
//! The unbiased sample covariance is `S / (n - 1)`. Only the feature
//! dimension is modeled; batch rows are treated as independent samples.
//! All accumulators are held in `f64`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Streaming summary of an activation distribution: sample count, feature
/// mean and unnormalized scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct InputStats {
    n: u64,
    mean: Vec<f64>,
    scatter: Matrix<f64>,
    feature_dim: usize,
}

impl InputStats {
    pub fn new(feature_dim: usize) -> Self {
        InputStats {
            n: 0,
            mean: vec![0.0; feature_dim],
            scatter: Matrix::zeros(feature_dim, feature_dim),
            feature_dim,
        }
    }

    /// Rebuilds a tracker from raw parts (snapshot loading).
    pub fn from_parts(n: u64, mean: Vec<f64>, scatter: Matrix<f64>) -> Result<Self> {
        let k = mean.len();
        if scatter.shape() != (k, k) {
            return Err(Error::shape(
                "InputStats::from_parts",
                format!("{k}x{k} scatter"),
                format!("{:?}", scatter.shape()),
            ));
        }
        Ok(InputStats {
            n,
            mean,
            scatter,
            feature_dim: k,
        })
    }

    pub fn sample_count(&self) -> u64 {
        self.n
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scatter(&self) -> &Matrix<f64> {
        &self.scatter
    }

    /// Merges one batch of rows into the summary.
    pub fn update(&mut self, batch: &Matrix<f32>) -> Result<()> {
        if batch.cols() != self.feature_dim {
            return Err(Error::shape(
                "input_update",
                format!("batch with {} columns", self.feature_dim),
                format!("{:?}", batch.shape()),
            ));
        }
        if !batch.all_finite() {
            return Err(Error::NonFiniteInput("input_update"));
        }
        let b = batch.rows() as u64;
        if b == 0 {
            return Ok(());
        }
        let k = self.feature_dim;

        let mut mu_b = vec![0.0f64; k];
        for i in 0..batch.rows() {
            for (j, &v) in batch.row(i).iter().enumerate() {
                mu_b[j] += v as f64;
            }
        }
        for v in &mut mu_b {
            *v /= b as f64;
        }

        // centered batch scatter S_b = C^T C
        let centered = Matrix::from_fn(batch.rows(), k, |i, j| batch[(i, j)] as f64 - mu_b[j]);
        let s_b = crate::linalg::gram_tn(&centered, 1.0);

        let n_old = self.n;
        let n_new = n_old + b;
        let delta: Vec<f64> = mu_b
            .iter()
            .zip(&self.mean)
            .map(|(bm, om)| bm - om)
            .collect();

        let w_mean = b as f64 / n_new as f64;
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += w_mean * d;
        }

        let w_outer = n_old as f64 * b as f64 / n_new as f64;
        for i in 0..k {
            for j in 0..k {
                // delta[i] * delta[j] first keeps the scatter exactly symmetric
                let add = s_b[(i, j)] + w_outer * (delta[i] * delta[j]);
                self.scatter[(i, j)] += add;
            }
        }
        self.n = n_new;
        Ok(())
    }

    /// Unbiased sample covariance `S / (n - 1)`; needs at least two samples.
    pub fn covariance(&self) -> Result<Matrix<f64>> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: self.n,
            });
        }
        let denom = (self.n - 1) as f64;
        Ok(self.scatter.map(|v| v / denom))
    }
}
