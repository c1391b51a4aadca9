//! Reference and simulated low-precision GEMM.
//!
//! The reference kernel accumulates in 64-bit and rounds once to 32-bit
//! output. The low-precision kernel quantizes both operands per their
//! recipes, multiplies the dequantized values with 32-bit accumulation, and
//! is bit-deterministic for fixed inputs and recipes (fixed summation
//! order, no threading inside a single GEMM).
//!
//! Three products of a linear layer are covered, selected by
//! [`GemmDirection`]:
//!
//! - `Forward`:            `x (B,K) . w (N,K)^T -> (B,N)`
//! - `BackwardInputGrad`:  `dy (B,N) . w (N,K)  -> (B,K)`
//! - `BackwardWeightGrad`: `dy (B,N)^T . x (B,K) -> (N,K)`

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::quant::{dequantize, quantize, QuantRecipe};

/// Shape and options of one linear layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    /// Batch rows (the GEMM M dimension).
    pub batch: usize,
    /// Input features (the GEMM K dimension).
    pub in_features: usize,
    /// Output features (the GEMM N dimension).
    pub out_features: usize,
    #[serde(default)]
    pub has_bias: bool,
}

impl LayerSpec {
    /// Multiply-accumulate count of one GEMM on this layer.
    pub fn mac_count(&self) -> u64 {
        self.batch as u64 * self.in_features as u64 * self.out_features as u64
    }
}

/// Which of the three linear-layer products a GEMM computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GemmDirection {
    Forward,
    BackwardInputGrad,
    BackwardWeightGrad,
}

impl GemmDirection {
    pub const ALL: [GemmDirection; 3] = [
        GemmDirection::Forward,
        GemmDirection::BackwardInputGrad,
        GemmDirection::BackwardWeightGrad,
    ];
}

impl fmt::Display for GemmDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GemmDirection::Forward => "forward",
            GemmDirection::BackwardInputGrad => "backward_input",
            GemmDirection::BackwardWeightGrad => "backward_weight",
        };
        write!(f, "{s}")
    }
}

impl FromStr for GemmDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forward" => Ok(GemmDirection::Forward),
            "backward_input" => Ok(GemmDirection::BackwardInputGrad),
            "backward_weight" => Ok(GemmDirection::BackwardWeightGrad),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// `a (p,q) . b (q,r)` with 64-bit accumulation, rounded to 32-bit output.
/// Summation runs in ascending k order.
fn matmul_f64acc(a: &Matrix<f32>, b: &Matrix<f32>) -> Matrix<f32> {
    let (p, q) = a.shape();
    let r = b.cols();
    debug_assert_eq!(q, b.rows());
    let mut out = Matrix::<f32>::zeros(p, r);
    let mut acc = vec![0.0f64; r];
    for i in 0..p {
        acc.iter_mut().for_each(|v| *v = 0.0);
        let a_row = a.row(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let aik = aik as f64;
            let b_row = b.row(k);
            for (j, &bkj) in b_row.iter().enumerate() {
                acc[j] += aik * bkj as f64;
            }
        }
        let out_row = out.row_mut(i);
        for j in 0..r {
            out_row[j] = acc[j] as f32;
        }
    }
    out
}

/// Same product with 32-bit accumulation.
fn matmul_f32acc(a: &Matrix<f32>, b: &Matrix<f32>) -> Matrix<f32> {
    let (p, q) = a.shape();
    let r = b.cols();
    debug_assert_eq!(q, b.rows());
    let mut out = Matrix::<f32>::zeros(p, r);
    for i in 0..p {
        let a_row = a.row(i);
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = b.row(k);
            let out_row = out.row_mut(i);
            for (j, &bkj) in b_row.iter().enumerate() {
                out_row[j] += aik * bkj;
            }
        }
    }
    out
}

fn check_direction_shapes(
    lhs: &Matrix<f32>,
    rhs: &Matrix<f32>,
    direction: GemmDirection,
) -> Result<()> {
    let ok = match direction {
        // x (B,K), w (N,K): inner dims are the column counts
        GemmDirection::Forward => lhs.cols() == rhs.cols(),
        // dy (B,N), w (N,K)
        GemmDirection::BackwardInputGrad => lhs.cols() == rhs.rows(),
        // dy (B,N), x (B,K)
        GemmDirection::BackwardWeightGrad => lhs.rows() == rhs.rows(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::shape(
            "gemm",
            format!("compatible operands for {direction}"),
            format!("{:?} x {:?}", lhs.shape(), rhs.shape()),
        ))
    }
}

/// Forward product `x . w^T` with 64-bit accumulation.
pub fn gemm_ref(x: &Matrix<f32>, w: &Matrix<f32>) -> Result<Matrix<f32>> {
    gemm_ref_direction(x, w, GemmDirection::Forward)
}

/// High-precision reference for any direction.
pub fn gemm_ref_direction(
    lhs: &Matrix<f32>,
    rhs: &Matrix<f32>,
    direction: GemmDirection,
) -> Result<Matrix<f32>> {
    check_direction_shapes(lhs, rhs, direction)?;
    Ok(match direction {
        GemmDirection::Forward => matmul_f64acc(lhs, &rhs.transpose()),
        GemmDirection::BackwardInputGrad => matmul_f64acc(lhs, rhs),
        GemmDirection::BackwardWeightGrad => matmul_f64acc(&lhs.transpose(), rhs),
    })
}

/// Simulated low-precision GEMM: quantize both operands, multiply the
/// dequantized values with 32-bit accumulation.
pub fn gemm_lowprec(
    lhs: &Matrix<f32>,
    rhs: &Matrix<f32>,
    recipe_lhs: &QuantRecipe,
    recipe_rhs: &QuantRecipe,
    direction: GemmDirection,
) -> Result<Matrix<f32>> {
    check_direction_shapes(lhs, rhs, direction)?;
    let lhs_dq = dequantize(&quantize(lhs, recipe_lhs)?);
    let rhs_dq = dequantize(&quantize(rhs, recipe_rhs)?);
    Ok(match direction {
        GemmDirection::Forward => matmul_f32acc(&lhs_dq, &rhs_dq.transpose()),
        GemmDirection::BackwardInputGrad => matmul_f32acc(&lhs_dq, &rhs_dq),
        GemmDirection::BackwardWeightGrad => matmul_f32acc(&lhs_dq.transpose(), &rhs_dq),
    })
}

/// Adds a per-output-feature bias in 32-bit, after dequantization.
pub fn add_bias(out: &mut Matrix<f32>, bias: &[f32]) -> Result<()> {
    if bias.len() != out.cols() {
        return Err(Error::shape(
            "add_bias",
            format!("bias length {}", out.cols()),
            format!("{}", bias.len()),
        ));
    }
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(())
}
