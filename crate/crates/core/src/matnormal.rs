//! Matrix-normal weight tracking with Kronecker-factored covariance.
//!
//! A weight matrix `W (M,N)` is modeled as `MN(mean, U, V)` with row
//! covariance `U (M,M)` and column covariance `V (N,N)`, so
//! `vec(W) ~ N(vec(mean), V (x) U)`. The factors are maintained online by a
//! flip-flop style update smoothed with an exponential moving average:
//! each observation is whitened by the Cholesky factor of one side to
//! estimate the other, inverses are never formed explicitly.
//!
//! Because `V (x) U` is invariant under `(cU, V/c)`, the factors are
//! renormalized to `trace(U) = M` after every update.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jittered, gram_tn, matmul_nt, solve_lower, solve_lower_transpose_right, symmetrize};
use crate::matrix::Matrix;

/// Default EMA momentum, the midpoint of the stable range \[0.9, 0.99\].
pub const DEFAULT_MOMENTUM: f64 = 0.95;

/// Default relative jitter for covariance regularization.
pub const DEFAULT_EPSILON_REL: f64 = 1e-6;

/// Streaming summary of a weight distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStats {
    mean: Matrix<f64>,
    row_cov: Matrix<f64>,
    col_cov: Matrix<f64>,
    momentum: f64,
    epsilon_rel: f64,
    update_count: u64,
}

impl WeightStats {
    /// Fresh tracker with identity covariance priors. The mean is taken from
    /// the first observed weight.
    pub fn new(rows: usize, cols: usize, momentum: f64, epsilon_rel: f64) -> Self {
        assert!(
            (0.0..1.0).contains(&momentum),
            "momentum must be in [0, 1)"
        );
        WeightStats {
            mean: Matrix::zeros(rows, cols),
            row_cov: Matrix::<f64>::identity(rows),
            col_cov: Matrix::<f64>::identity(cols),
            momentum,
            epsilon_rel,
            update_count: 0,
        }
    }

    pub fn with_defaults(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, DEFAULT_MOMENTUM, DEFAULT_EPSILON_REL)
    }

    /// Rebuilds a tracker from raw parts (snapshot loading).
    pub fn from_parts(
        mean: Matrix<f64>,
        row_cov: Matrix<f64>,
        col_cov: Matrix<f64>,
        momentum: f64,
        epsilon_rel: f64,
        update_count: u64,
    ) -> Result<Self> {
        let (m, n) = mean.shape();
        if row_cov.shape() != (m, m) || col_cov.shape() != (n, n) {
            return Err(Error::shape(
                "WeightStats::from_parts",
                format!("({m},{m}) row cov and ({n},{n}) col cov"),
                format!("{:?} / {:?}", row_cov.shape(), col_cov.shape()),
            ));
        }
        Ok(WeightStats {
            mean,
            row_cov,
            col_cov,
            momentum,
            epsilon_rel,
            update_count,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    pub fn mean(&self) -> &Matrix<f64> {
        &self.mean
    }

    /// Row covariance factor U.
    pub fn row_cov(&self) -> &Matrix<f64> {
        &self.row_cov
    }

    /// Column covariance factor V.
    pub fn col_cov(&self) -> &Matrix<f64> {
        &self.col_cov
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn epsilon_rel(&self) -> f64 {
        self.epsilon_rel
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    /// Folds one observed weight matrix into the tracked distribution.
    pub fn update(&mut self, w: &Matrix<f32>) -> Result<()> {
        let (m, n) = self.mean.shape();
        if w.shape() != (m, n) {
            return Err(Error::shape(
                "weight_update",
                format!("({m},{n})"),
                format!("{:?}", w.shape()),
            ));
        }
        if !w.all_finite() {
            return Err(Error::NonFiniteInput("weight_update"));
        }
        let w64 = w.to_f64();
        if self.update_count == 0 {
            self.mean = w64.clone();
        }

        // center by the current mean, then advance the mean EMA
        let centered = Matrix::from_fn(m, n, |i, j| w64[(i, j)] - self.mean[(i, j)]);

        // per-update factor estimates, each whitened by the other factor
        let l_v = cholesky_jittered(&self.col_cov, self.epsilon_rel)?;
        let whitened_cols = solve_lower_transpose_right(&l_v, &centered);
        let u_hat = matmul_nt(&whitened_cols, &whitened_cols).map(|v| v / n as f64);

        let l_u = cholesky_jittered(&self.row_cov, self.epsilon_rel)?;
        let whitened_rows = solve_lower(&l_u, &centered);
        let v_hat = gram_tn(&whitened_rows, 1.0 / m as f64);

        let mm = self.momentum;
        let blend = |cur: &Matrix<f64>, est: &Matrix<f64>| {
            Matrix::from_fn(cur.rows(), cur.cols(), |i, j| {
                mm * cur[(i, j)] + (1.0 - mm) * est[(i, j)]
            })
        };
        let u_new = blend(&self.row_cov, &u_hat);
        let v_new = blend(&self.col_cov, &v_hat);

        // symmetrize and regularize
        let mut u = symmetrize(&u_new);
        let eps_u = self.epsilon_rel * u.trace() / m as f64;
        for i in 0..m {
            u[(i, i)] += eps_u;
        }
        let mut v = symmetrize(&v_new);
        let eps_v = self.epsilon_rel * v.trace() / n as f64;
        for i in 0..n {
            v[(i, i)] += eps_v;
        }

        // resolve the (cU, V/c) ambiguity: renormalize trace(U) to M
        let s = u.trace() / m as f64;
        for val in u.as_mut_slice() {
            *val /= s;
        }
        for val in v.as_mut_slice() {
            *val *= s;
        }

        self.row_cov = u;
        self.col_cov = v;
        if self.update_count > 0 {
            for i in 0..m {
                for j in 0..n {
                    self.mean[(i, j)] = mm * self.mean[(i, j)] + (1.0 - mm) * w64[(i, j)];
                }
            }
        }
        self.update_count += 1;
        Ok(())
    }
}
