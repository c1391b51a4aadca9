//! Reference math for the model adaptations: block-wise RMS normalization,
//! Hard Swish, and the baselines they replace (row RMSNorm, Swish).
//!
//! Forward and backward passes are analytic; the normalization carries no
//! learned gain, and blocks are independent, so the Jacobian of the block
//! norm is block-diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Block-wise normalization configuration. The feature dimension must be
/// divisible by `block_size`; the same block size must be used across
/// training and serving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockNormConfig {
    pub block_size: usize,
    pub eps: f64,
}

impl Default for BlockNormConfig {
    fn default() -> Self {
        BlockNormConfig {
            block_size: 256,
            eps: 1e-6,
        }
    }
}

/// Unparameterized RMS normalization of one vector:
/// `y_i = x_i / sqrt(mean(x^2) + eps)`.
pub fn rmsnorm(x: &[f32], eps: f64) -> Vec<f32> {
    let mut out = vec![0.0f32; x.len()];
    rmsnorm_into(x, eps, &mut out);
    out
}

fn rmsnorm_into(x: &[f32], eps: f64, out: &mut [f32]) {
    let n = x.len() as f64;
    let ms = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / n;
    let inv = 1.0 / (ms + eps).sqrt();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v as f64 * inv) as f32;
    }
}

fn check_divisible(n: usize, cfg: &BlockNormConfig) -> Result<()> {
    if cfg.block_size == 0 || n % cfg.block_size != 0 {
        return Err(Error::IndivisibleFeatureDim {
            n,
            block_size: cfg.block_size,
        });
    }
    Ok(())
}

/// RMS normalization applied independently per `block_size` slice of each row.
pub fn blocknorm_forward(x: &Matrix<f32>, cfg: &BlockNormConfig) -> Result<Matrix<f32>> {
    check_divisible(x.cols(), cfg)?;
    let mut out = Matrix::<f32>::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let src = x.row(i);
        let dst = out.row_mut(i);
        for (s, d) in src
            .chunks_exact(cfg.block_size)
            .zip(dst.chunks_exact_mut(cfg.block_size))
        {
            rmsnorm_into(s, cfg.eps, d);
        }
    }
    Ok(out)
}

/// Gradient of [`blocknorm_forward`] contracted with `upstream`.
///
/// Per block with `r = sqrt(mean(x^2) + eps)`:
/// `dx_j = g_j / r - x_j * <g, x> / (L r^3)`.
pub fn blocknorm_backward(
    x: &Matrix<f32>,
    upstream: &Matrix<f32>,
    cfg: &BlockNormConfig,
) -> Result<Matrix<f32>> {
    if x.shape() != upstream.shape() {
        return Err(Error::shape(
            "blocknorm_backward",
            format!("{:?}", x.shape()),
            format!("{:?}", upstream.shape()),
        ));
    }
    check_divisible(x.cols(), cfg)?;
    let block = cfg.block_size;
    let mut out = Matrix::<f32>::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let xr = x.row(i);
        let gr = upstream.row(i);
        let dr = out.row_mut(i);
        for ((xb, gb), db) in xr
            .chunks_exact(block)
            .zip(gr.chunks_exact(block))
            .zip(dr.chunks_exact_mut(block))
        {
            let l = block as f64;
            let ms = xb.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / l;
            let r2 = ms + cfg.eps;
            let r = r2.sqrt();
            let gx: f64 = gb
                .iter()
                .zip(xb)
                .map(|(&g, &v)| g as f64 * v as f64)
                .sum();
            let coef = gx / (l * r2 * r);
            for ((d, &g), &v) in db.iter_mut().zip(gb).zip(xb) {
                *d = (g as f64 / r - v as f64 * coef) as f32;
            }
        }
    }
    Ok(out)
}

/// `h-swish(x) = x * relu6(x + 3) / 6`, evaluated piecewise:
/// 0 for `x <= -3`, `x (x + 3) / 6` in between, `x` for `x >= 3`.
pub fn hardswish_forward(x: &Matrix<f32>) -> Matrix<f32> {
    x.map(hardswish_scalar)
}

#[inline]
pub fn hardswish_scalar(x: f32) -> f32 {
    if x <= -3.0 {
        0.0
    } else if x >= 3.0 {
        x
    } else {
        x * (x + 3.0) / 6.0
    }
}

/// Derivative of Hard Swish contracted with `upstream`; the right-limit
/// convention applies at the breakpoints, so x = -3 uses the quadratic
/// piece and x = 3 uses 1.
pub fn hardswish_backward(x: &Matrix<f32>, upstream: &Matrix<f32>) -> Result<Matrix<f32>> {
    if x.shape() != upstream.shape() {
        return Err(Error::shape(
            "hardswish_backward",
            format!("{:?}", x.shape()),
            format!("{:?}", upstream.shape()),
        ));
    }
    Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        upstream[(i, j)] * hardswish_derivative(x[(i, j)])
    }))
}

#[inline]
pub fn hardswish_derivative(x: f32) -> f32 {
    if x < -3.0 {
        0.0
    } else if x >= 3.0 {
        1.0
    } else {
        (2.0 * x + 3.0) / 6.0
    }
}

/// Reference Swish: `x * sigmoid(x)`.
pub fn swish_ref(x: f32) -> f32 {
    let xd = x as f64;
    (xd / (1.0 + (-xd).exp())) as f32
}

/// Bounded ReLU: `min(max(x, 0), 6)`.
pub fn relu6(x: f32) -> f32 {
    x.clamp(0.0, 6.0)
}
