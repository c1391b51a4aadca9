//! Deterministic random number generation.
//!
//! The generator is pinned so sampled tensors are reproducible: a ChaCha12
//! counter-based stream cipher supplies uniform 64-bit words, and standard
//! normals come from the Marsaglia polar transform computed in `f64`. The
//! same seed (and stream id) yields the same normal sequence on every run;
//! changing either gives an independent stream.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Seeded standard-normal source.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha12Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Self {
        Rng {
            inner: ChaCha12Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Independent stream derived from the same seed. Streams with distinct
    /// ids never overlap.
    pub fn from_seed_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Rng {
            inner,
            spare: None,
        }
    }

    /// Uniform in the half-open unit interval, 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        // top 53 bits of a uniform u64
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the Marsaglia polar method.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }

    /// Matrix of iid standard normals, rounded to `f32`.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> crate::matrix::Matrix<f32> {
        crate::matrix::Matrix::from_fn(rows, cols, |_, _| self.standard_normal() as f32)
    }

    /// Matrix of iid standard normals in `f64`.
    pub fn normal_matrix_f64(&mut self, rows: usize, cols: usize) -> crate::matrix::Matrix<f64> {
        crate::matrix::Matrix::from_fn(rows, cols, |_, _| self.standard_normal())
    }
}

/// SplitMix64 mixing step, used to fold identifiers into stream ids.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of ids (layer index, direction, sample index, ...) into
/// one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut acc = 0x243F_6A88_85A3_08D3; // arbitrary non-zero start
    for &p in parts {
        acc = mix64(acc ^ p);
    }
    acc
}

/// FNV-1a hash of a string, for folding names into stream ids.
pub fn hash_str(s: &str) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
