//! Synthetic data generators standing in for real training traces.
//!
//! Inputs: zero-mean Gaussian batches with a configurable feature covariance:
//! iid, AR(1)-correlated, or a correlated heavy-scale ladder where feature j
//! has standard deviation `max_ratio^(j / (K-1))`, giving covariance
//! condition numbers up to `max_ratio^2`.
//!
//! Weights: iid normal, or rows scaled by the same kind of geometric ladder
//! (rows of a weight matrix are output channels, so this produces the
//! per-row scale heterogeneity that rowwise quantization exploits).

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::cholesky_jittered;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::sampling::sample_gaussian_rows;

fn default_rho() -> f64 {
    0.5
}

/// Input batch distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputGenKind {
    /// iid N(0, 1) features.
    Normal,
    /// AR(1) feature correlation, unit variances.
    Correlated { rho: f64 },
    /// Geometric scale ladder across features with optional correlation.
    HeavyScale {
        max_ratio: f64,
        #[serde(default = "default_rho")]
        rho: f64,
    },
}

impl Default for InputGenKind {
    fn default() -> Self {
        InputGenKind::Normal
    }
}

/// Covariance matrix of an input generator over `dim` features.
pub fn input_covariance(kind: InputGenKind, dim: usize) -> Matrix<f64> {
    let (rho, ratio) = match kind {
        InputGenKind::Normal => (0.0, 1.0),
        InputGenKind::Correlated { rho } => (rho, 1.0),
        InputGenKind::HeavyScale { max_ratio, rho } => (rho, max_ratio),
    };
    let scale = |j: usize| {
        if dim <= 1 {
            1.0
        } else {
            ratio.powf(j as f64 / (dim as f64 - 1.0))
        }
    };
    Matrix::from_fn(dim, dim, |i, j| {
        scale(i) * scale(j) * rho.powi((i as i32 - j as i32).abs())
    })
}

/// Pre-factored input batch generator.
#[derive(Debug, Clone)]
pub struct InputGenerator {
    dim: usize,
    /// `None` for the identity-covariance fast path.
    factor: Option<Matrix<f64>>,
}

impl InputGenerator {
    pub fn new(kind: InputGenKind, dim: usize) -> Result<Self> {
        let factor = match kind {
            InputGenKind::Normal => None,
            _ => Some(cholesky_jittered(&input_covariance(kind, dim), 1e-12)?),
        };
        Ok(InputGenerator { dim, factor })
    }

    pub fn batch(&self, rows: usize, rng: &mut Rng) -> Matrix<f32> {
        match &self.factor {
            None => rng.normal_matrix(rows, self.dim),
            Some(l) => {
                let mean = vec![0.0; self.dim];
                sample_gaussian_rows(&mean, l, rows, rng)
            }
        }
    }
}

/// Weight matrix distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightGenKind {
    /// iid N(0, 1) entries.
    Normal,
    /// Row r scaled by `max_ratio^(r / (M-1))`.
    HeavyRowScale { max_ratio: f64 },
}

impl Default for WeightGenKind {
    fn default() -> Self {
        WeightGenKind::Normal
    }
}

/// Weight generator for a fixed `(rows, cols)` shape.
#[derive(Debug, Clone)]
pub struct WeightGenerator {
    kind: WeightGenKind,
    rows: usize,
    cols: usize,
}

impl WeightGenerator {
    pub fn new(kind: WeightGenKind, rows: usize, cols: usize) -> Self {
        WeightGenerator { kind, rows, cols }
    }

    pub fn matrix(&self, rng: &mut Rng) -> Matrix<f32> {
        let base = rng.normal_matrix(self.rows, self.cols);
        match self.kind {
            WeightGenKind::Normal => base,
            WeightGenKind::HeavyRowScale { max_ratio } => {
                let denom = (self.rows.max(2) - 1) as f64;
                Matrix::from_fn(self.rows, self.cols, |i, j| {
                    base[(i, j)] * max_ratio.powf(i as f64 / denom) as f32
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::welford::InputStats;

    #[test]
    fn normal_generator_is_identity_covariance() {
        let cov = input_covariance(InputGenKind::Normal, 4);
        assert!(cov.rel_frob_dist(&Matrix::<f64>::identity(4)) < 1e-12);
    }

    #[test]
    fn heavy_scale_condition_number() {
        let cov = input_covariance(
            InputGenKind::HeavyScale {
                max_ratio: 100.0,
                rho: 0.0,
            },
            8,
        );
        // diagonal spans 1 .. ratio^2
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((cov[(7, 7)] - 1e4).abs() < 1e-8);
    }

    #[test]
    fn tracked_covariance_matches_generator() {
        let kind = InputGenKind::Correlated { rho: 0.6 };
        let gen = InputGenerator::new(kind, 6).unwrap();
        let mut rng = Rng::from_seed(55);
        let mut stats = InputStats::new(6);
        for _ in 0..200 {
            stats.update(&gen.batch(100, &mut rng)).unwrap();
        }
        let cov = stats.covariance().unwrap();
        let expect = input_covariance(kind, 6);
        assert!(
            cov.rel_frob_dist(&expect) < 0.05,
            "dist {}",
            cov.rel_frob_dist(&expect)
        );
    }

    #[test]
    fn heavy_row_weights_have_row_scale_spread() {
        let gen = WeightGenerator::new(WeightGenKind::HeavyRowScale { max_ratio: 64.0 }, 8, 32);
        let mut rng = Rng::from_seed(77);
        let w = gen.matrix(&mut rng);
        let amax = |r: usize| {
            w.row(r)
                .iter()
                .map(|v| v.abs())
                .fold(0.0f32, f32::max)
        };
        assert!(amax(7) / amax(0) > 16.0, "{} vs {}", amax(7), amax(0));
    }

    #[test]
    fn generators_deterministic() {
        let gen = InputGenerator::new(InputGenKind::HeavyScale { max_ratio: 10.0, rho: 0.5 }, 5)
            .unwrap();
        let a = gen.batch(7, &mut Rng::from_seed(9));
        let b = gen.batch(7, &mut Rng::from_seed(9));
        assert_eq!(a, b);
    }
}
