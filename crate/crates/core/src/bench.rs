//! Wall-clock throughput measurement of the software GEMM kernels.
//!
//! Measurements are end-to-end for the quantized path: quantize both
//! operands, multiply, dequantize is part of the kernel. A process-wide lock
//! serializes concurrent measurements so latencies stay meaningful when
//! probing runs on multiple threads.

use serde::{Deserialize, Serialize};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::Result;
use crate::gemm::{gemm_lowprec, gemm_ref_direction, GemmDirection, LayerSpec};
use crate::matrix::Matrix;
use crate::quant::RecipePair;
use crate::rng::Rng;

static BENCH_LOCK: Mutex<()> = Mutex::new(());

/// One throughput measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    /// Multiply-accumulates per second, `B*N*K / median_latency`.
    pub elements_per_second: f64,
    /// Median wall-clock seconds per GEMM.
    pub median_latency: f64,
    pub repetitions: u32,
}

impl ThroughputSample {
    /// Synthesizes a sample from an externally supplied rate (injected
    /// throughput tables); the latency is back-derived from the layer size.
    pub fn from_rate(elements_per_second: f64, macs: u64) -> Self {
        ThroughputSample {
            elements_per_second,
            median_latency: macs as f64 / elements_per_second,
            repetitions: 1,
        }
    }
}

/// Operand pair with the right shapes for `direction` on `spec`.
fn operands(spec: &LayerSpec, direction: GemmDirection, rng: &mut Rng) -> (Matrix<f32>, Matrix<f32>) {
    let (b, k, n) = (spec.batch, spec.in_features, spec.out_features);
    match direction {
        GemmDirection::Forward => (rng.normal_matrix(b, k), rng.normal_matrix(n, k)),
        GemmDirection::BackwardInputGrad => (rng.normal_matrix(b, n), rng.normal_matrix(n, k)),
        GemmDirection::BackwardWeightGrad => (rng.normal_matrix(b, n), rng.normal_matrix(b, k)),
    }
}

/// Measures median GEMM latency on dedicated buffers.
///
/// `recipes = None` times the high-precision reference kernel; `Some` times
/// quantize + low-precision multiply with the pair's per-operand recipes.
/// `repetitions` must be >= 3.
pub fn bench_throughput(
    spec: &LayerSpec,
    recipes: Option<&RecipePair>,
    direction: GemmDirection,
    repetitions: u32,
    warmup: u32,
) -> Result<ThroughputSample> {
    assert!(repetitions >= 3, "need at least 3 repetitions");
    let _guard = BENCH_LOCK.lock().unwrap();

    let mut rng = Rng::from_seed(0xBE7C);
    let (lhs, rhs) = operands(spec, direction, &mut rng);

    let run = || -> Result<()> {
        match recipes {
            None => {
                let out = gemm_ref_direction(&lhs, &rhs, direction)?;
                std::hint::black_box(&out);
            }
            Some(pair) => {
                let out = gemm_lowprec(&lhs, &rhs, &pair.lhs, &pair.rhs, direction)?;
                std::hint::black_box(&out);
            }
        }
        Ok(())
    };

    for _ in 0..warmup {
        run()?;
    }
    let mut latencies = Vec::with_capacity(repetitions as usize);
    for _ in 0..repetitions {
        let start = Instant::now();
        run()?;
        latencies.push(start.elapsed().as_secs_f64());
    }
    latencies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = latencies[latencies.len() / 2].max(1e-12);

    Ok(ThroughputSample {
        elements_per_second: spec.mac_count() as f64 / median,
        median_latency: median,
        repetitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fp8::E4M3;
    use crate::quant::{Granularity, QuantRecipe};

    fn layer(name: &str, b: usize, k: usize, n: usize) -> LayerSpec {
        LayerSpec {
            name: name.into(),
            batch: b,
            in_features: k,
            out_features: n,
            has_bias: false,
        }
    }

    #[test]
    fn median_of_three_and_fields() {
        let spec = layer("t", 8, 8, 8);
        let s = bench_throughput(&spec, None, GemmDirection::Forward, 3, 1).unwrap();
        assert_eq!(s.repetitions, 3);
        assert!(s.median_latency > 0.0);
        assert!(s.elements_per_second > 0.0);
    }

    #[test]
    fn baseline_vs_itself_is_near_unity() {
        let spec = layer("t", 64, 64, 64);
        let a = bench_throughput(&spec, None, GemmDirection::Forward, 7, 2).unwrap();
        let b = bench_throughput(&spec, None, GemmDirection::Forward, 7, 2).unwrap();
        let ratio = a.elements_per_second / b.elements_per_second;
        assert!(ratio > 0.2 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn larger_batch_does_not_collapse_throughput() {
        // rate should be roughly non-decreasing with batch on the reference
        // kernel; generous tolerance, timing is noisy
        let small = bench_throughput(&layer("s", 16, 64, 64), None, GemmDirection::Forward, 5, 2)
            .unwrap();
        let large = bench_throughput(&layer("l", 128, 64, 64), None, GemmDirection::Forward, 5, 2)
            .unwrap();
        assert!(
            large.elements_per_second > 0.1 * small.elements_per_second,
            "large {} vs small {}",
            large.elements_per_second,
            small.elements_per_second
        );
    }

    #[test]
    fn quantized_path_measurable() {
        let pair = RecipePair::uniform(QuantRecipe::new(E4M3, Granularity::Tensorwise));
        let spec = layer("q", 32, 32, 32);
        let s = bench_throughput(&spec, Some(&pair), GemmDirection::BackwardWeightGrad, 3, 1)
            .unwrap();
        assert!(s.elements_per_second > 0.0);
    }

    #[test]
    fn injected_rate_roundtrip() {
        let s = ThroughputSample::from_rate(1e9, 1 << 20);
        assert_eq!(s.elements_per_second, 1e9);
        assert_eq!(s.repetitions, 1);
        assert!((s.median_latency - (1 << 20) as f64 / 1e9).abs() < 1e-15);
    }
}
