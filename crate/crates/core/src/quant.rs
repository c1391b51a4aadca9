//! Quantization recipes and matrix (de)quantization.
//!
//! A [`QuantRecipe`] names an 8-bit format plus a scaling granularity:
//! one scale for the whole tensor, one per row, or one per fixed-size block.
//! Scales follow amax scaling, `scale = amax(granule) / max_finite`, held in
//! 64-bit so the amax element of every granule survives a quantize →
//! dequantize roundtrip bit-exactly.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fp8::{decode, encode, Fp8Format};
use crate::matrix::Matrix;

/// Scaling granularity of a quantization recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Granularity {
    /// One scale for the whole matrix.
    Tensorwise,
    /// One scale per row.
    Rowwise,
    /// One scale per `block_rows x block_cols` tile.
    Blockwise { block_rows: usize, block_cols: usize },
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Granularity::Tensorwise => write!(f, "tensorwise"),
            Granularity::Rowwise => write!(f, "rowwise"),
            Granularity::Blockwise {
                block_rows,
                block_cols,
            } => write!(f, "blockwise:{}x{}", block_rows, block_cols),
        }
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tensorwise" => Ok(Granularity::Tensorwise),
            "rowwise" => Ok(Granularity::Rowwise),
            other => {
                let spec = other
                    .strip_prefix("blockwise:")
                    .ok_or_else(|| format!("unknown granularity {other:?}"))?;
                let (bm, bn) = spec
                    .split_once('x')
                    .ok_or_else(|| format!("blockwise geometry {spec:?} is not BMxBN"))?;
                let block_rows: usize = bm
                    .parse()
                    .map_err(|_| format!("bad block rows {bm:?}"))?;
                let block_cols: usize = bn
                    .parse()
                    .map_err(|_| format!("bad block cols {bn:?}"))?;
                if block_rows == 0 || block_cols == 0 {
                    return Err("block dimensions must be >= 1".into());
                }
                Ok(Granularity::Blockwise {
                    block_rows,
                    block_cols,
                })
            }
        }
    }
}

/// One candidate low-precision execution scheme: format, granularity and
/// overflow handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantRecipe {
    pub format: Fp8Format,
    pub granularity: Granularity,
    pub saturate_on_overflow: bool,
}

impl QuantRecipe {
    pub fn new(format: Fp8Format, granularity: Granularity) -> Self {
        QuantRecipe {
            format,
            granularity,
            saturate_on_overflow: true,
        }
    }
}

impl fmt::Display for QuantRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.format.name(), self.granularity)
    }
}

impl FromStr for QuantRecipe {
    type Err = String;

    /// Parses `"<format>:<granularity>"`, e.g. `"e4m3:rowwise"` or
    /// `"e5m2:blockwise:1x128"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (fmt_name, gran) = s
            .split_once(':')
            .ok_or_else(|| format!("recipe {s:?} is not <format>:<granularity>"))?;
        let format =
            Fp8Format::from_name(fmt_name).ok_or_else(|| format!("unknown format {fmt_name:?}"))?;
        Ok(QuantRecipe::new(format, gran.parse()?))
    }
}

/// Recipes for the two operands of one GEMM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipePair {
    pub lhs: QuantRecipe,
    pub rhs: QuantRecipe,
}

impl RecipePair {
    /// The same recipe on both operands.
    pub fn uniform(recipe: QuantRecipe) -> Self {
        RecipePair {
            lhs: recipe,
            rhs: recipe,
        }
    }
}

/// A quantized matrix: 8-bit codes plus per-granule scales and the recipe
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    pub codes: Matrix<u8>,
    pub scales: Vec<f64>,
    pub recipe: QuantRecipe,
}

impl QuantizedMatrix {
    /// Scale of the granule containing element `(i, j)`.
    #[inline]
    pub fn scale_at(&self, i: usize, j: usize) -> f64 {
        self.scales[granule_index(
            self.recipe.granularity,
            self.codes.rows(),
            self.codes.cols(),
            i,
            j,
        )]
    }
}

/// Number of scale entries a granularity produces on an `rows x cols` matrix.
pub fn scale_count(granularity: Granularity, rows: usize, cols: usize) -> usize {
    match granularity {
        Granularity::Tensorwise => 1,
        Granularity::Rowwise => rows,
        Granularity::Blockwise {
            block_rows,
            block_cols,
        } => rows.div_ceil(block_rows) * cols.div_ceil(block_cols),
    }
}

#[inline]
fn granule_index(granularity: Granularity, _rows: usize, cols: usize, i: usize, j: usize) -> usize {
    match granularity {
        Granularity::Tensorwise => 0,
        Granularity::Rowwise => i,
        Granularity::Blockwise {
            block_rows,
            block_cols,
        } => {
            let grid_cols = cols.div_ceil(block_cols);
            (i / block_rows) * grid_cols + (j / block_cols)
        }
    }
}

/// Computes per-granule amax scales: `scale = amax / max_finite`, with
/// `scale = 1` for all-zero granules.
pub fn compute_scales(m: &Matrix<f32>, recipe: &QuantRecipe) -> Result<Vec<f64>> {
    if !m.all_finite() {
        return Err(Error::NonFiniteInput("compute_scales"));
    }
    let (rows, cols) = m.shape();
    let n_scales = scale_count(recipe.granularity, rows, cols);
    let mut amax = vec![0.0f64; n_scales];
    for i in 0..rows {
        let row = m.row(i);
        for (j, &v) in row.iter().enumerate() {
            let g = granule_index(recipe.granularity, rows, cols, i, j);
            let a = (v as f64).abs();
            if a > amax[g] {
                amax[g] = a;
            }
        }
    }
    Ok(amax
        .into_iter()
        .map(|a| {
            if a == 0.0 {
                1.0
            } else {
                a / recipe.format.max_finite
            }
        })
        .collect())
}

/// Quantizes `m` under `recipe`: `codes[i,j] = encode(m[i,j] / scale)`.
pub fn quantize(m: &Matrix<f32>, recipe: &QuantRecipe) -> Result<QuantizedMatrix> {
    let scales = compute_scales(m, recipe)?;
    let (rows, cols) = m.shape();
    let codes = Matrix::from_fn(rows, cols, |i, j| {
        let g = granule_index(recipe.granularity, rows, cols, i, j);
        encode(
            m[(i, j)] as f64 / scales[g],
            &recipe.format,
            recipe.saturate_on_overflow,
        )
    });
    Ok(QuantizedMatrix {
        codes,
        scales,
        recipe: *recipe,
    })
}

/// Reconstructs the real-valued matrix: `out[i,j] = decode(code) * scale`.
pub fn dequantize(q: &QuantizedMatrix) -> Matrix<f32> {
    let (rows, cols) = q.codes.shape();
    Matrix::from_fn(rows, cols, |i, j| {
        let g = granule_index(q.recipe.granularity, rows, cols, i, j);
        (decode(q.codes[(i, j)], &q.recipe.format) * q.scales[g]) as f32
    })
}
