//! Decides, per linear layer, whether low-precision (FP8-emulated) matrix
//! multiplication is numerically safe and worthwhile.
//!
//! The pieces, in pipeline order:
//!
//! - [`fp8`] / [`quant`]: bit-exact FP8 emulation and amax-scaled
//!   quantization at tensorwise, rowwise and blockwise granularity.
//! - [`gemm`] / [`bench`]: high-precision reference GEMM, simulated
//!   low-precision GEMM for forward and both backward products, and a
//!   throughput harness.
//! - [`welford`] / [`matnormal`]: streaming input and weight distribution
//!   trackers (batched Welford; Kronecker-factored matrix normal).
//! - [`sampling`] / [`synth`]: drawing realistic tensors from tracked or
//!   synthetic distributions via jittered Cholesky factors.
//! - [`probe`] / [`metrics`]: sampled MERE and throughput per layer and
//!   candidate recipe, including learned-vs-normal distribution comparisons.
//! - [`dispatch`]: constrained selection of the fastest recipe that meets
//!   the accuracy and speedup thresholds, with baseline fallback.
//! - [`mods`]: reference math for the block RMS normalization and Hard
//!   Swish building blocks, with analytic gradients.
//! - [`container`] / [`snapshot`]: versioned, checksummed file formats.

pub mod bench;
pub mod container;
pub mod dispatch;
pub mod error;
pub mod fp8;
pub mod gemm;
pub mod linalg;
pub mod matnormal;
pub mod matrix;
pub mod metrics;
pub mod mods;
pub mod probe;
pub mod quant;
pub mod rng;
pub mod sampling;
pub mod schedule;
pub mod snapshot;
pub mod synth;
pub mod welford;

pub use error::{Error, Result};
pub use matrix::Matrix;
