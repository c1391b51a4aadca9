//! Statistics snapshot persistence.
//!
//! Snapshots use the shared container format with these headers (all array
//! payloads are row-major little-endian `f64`, concatenated in manifest
//! order):
//!
//! **kind = "input_stats"**
//! ```json
//! {"kind": "input_stats", "feature_dim": K, "sample_count": n,
//!  "arrays": [{"name": "mean", "rows": 1, "cols": K},
//!             {"name": "scatter", "rows": K, "cols": K}]}
//! ```
//!
//! **kind = "weight_stats"**
//! ```json
//! {"kind": "weight_stats", "rows": M, "cols": N,
//!  "momentum": m, "epsilon_rel": e, "update_count": c,
//!  "arrays": [{"name": "mean", "rows": M, "cols": N},
//!             {"name": "row_cov", "rows": M, "cols": M},
//!             {"name": "col_cov", "rows": N, "cols": N}]}
//! ```
//!
//! Round-trips are bit-exact: `load(save(s)) == s`.

use serde_json::json;
use std::path::Path;

use crate::container;
use crate::error::{Error, Result};
use crate::matnormal::WeightStats;
use crate::matrix::Matrix;
use crate::welford::InputStats;

pub const INPUT_KIND: &str = "input_stats";
pub const WEIGHT_KIND: &str = "weight_stats";

/// Either tracker's persisted state.
#[derive(Debug, Clone, PartialEq)]
pub enum StatsSnapshot {
    Input(InputStats),
    Weight(WeightStats),
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn take_f64s(bytes: &[u8], count: usize, pos: &mut usize) -> Result<Vec<f64>> {
    let need = count * 8;
    if *pos + need > bytes.len() {
        return Err(Error::CorruptSnapshot("array payload truncated".into()));
    }
    let vals = bytes[*pos..*pos + need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    *pos += need;
    Ok(vals)
}

fn array_manifest(arrays: &[(&str, usize, usize)]) -> serde_json::Value {
    json!(arrays
        .iter()
        .map(|(name, rows, cols)| json!({"name": name, "rows": rows, "cols": cols}))
        .collect::<Vec<_>>())
}

pub fn save_input_stats(stats: &InputStats, path: &Path) -> Result<()> {
    let k = stats.feature_dim();
    let header = json!({
        "feature_dim": k,
        "sample_count": stats.sample_count(),
        "arrays": array_manifest(&[("mean", 1, k), ("scatter", k, k)]),
    });
    let mut payload = Vec::new();
    push_f64s(&mut payload, stats.mean());
    push_f64s(&mut payload, stats.scatter().as_slice());
    container::write_file(path, INPUT_KIND, &header, &payload)
}

pub fn save_weight_stats(stats: &WeightStats, path: &Path) -> Result<()> {
    let (m, n) = stats.shape();
    let header = json!({
        "rows": m,
        "cols": n,
        "momentum": stats.momentum(),
        "epsilon_rel": stats.epsilon_rel(),
        "update_count": stats.update_count(),
        "arrays": array_manifest(&[("mean", m, n), ("row_cov", m, m), ("col_cov", n, n)]),
    });
    let mut payload = Vec::new();
    push_f64s(&mut payload, stats.mean().as_slice());
    push_f64s(&mut payload, stats.row_cov().as_slice());
    push_f64s(&mut payload, stats.col_cov().as_slice());
    container::write_file(path, WEIGHT_KIND, &header, &payload)
}

fn header_usize(header: &serde_json::Value, field: &str) -> Result<usize> {
    header
        .get(field)
        .and_then(|v| v.as_u64())
        .map(|v| v as usize)
        .ok_or_else(|| Error::CorruptSnapshot(format!("header missing {field}")))
}

fn header_f64(header: &serde_json::Value, field: &str) -> Result<f64> {
    header
        .get(field)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::CorruptSnapshot(format!("header missing {field}")))
}

/// Loads either snapshot kind, sniffing from the header.
pub fn load_stats(path: &Path) -> Result<StatsSnapshot> {
    let doc = container::read_file(path)?;
    match doc.kind.as_str() {
        INPUT_KIND => {
            let k = header_usize(&doc.header, "feature_dim")?;
            let n = doc
                .header
                .get("sample_count")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::CorruptSnapshot("header missing sample_count".into()))?;
            let mut pos = 0;
            let mean = take_f64s(&doc.payload, k, &mut pos)?;
            let scatter = Matrix::from_vec(k, k, take_f64s(&doc.payload, k * k, &mut pos)?);
            if pos != doc.payload.len() {
                return Err(Error::CorruptSnapshot("trailing payload bytes".into()));
            }
            Ok(StatsSnapshot::Input(InputStats::from_parts(n, mean, scatter)?))
        }
        WEIGHT_KIND => {
            let m = header_usize(&doc.header, "rows")?;
            let n = header_usize(&doc.header, "cols")?;
            let momentum = header_f64(&doc.header, "momentum")?;
            let epsilon_rel = header_f64(&doc.header, "epsilon_rel")?;
            let count = doc
                .header
                .get("update_count")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::CorruptSnapshot("header missing update_count".into()))?;
            let mut pos = 0;
            let mean = Matrix::from_vec(m, n, take_f64s(&doc.payload, m * n, &mut pos)?);
            let row_cov = Matrix::from_vec(m, m, take_f64s(&doc.payload, m * m, &mut pos)?);
            let col_cov = Matrix::from_vec(n, n, take_f64s(&doc.payload, n * n, &mut pos)?);
            if pos != doc.payload.len() {
                return Err(Error::CorruptSnapshot("trailing payload bytes".into()));
            }
            Ok(StatsSnapshot::Weight(WeightStats::from_parts(
                mean, row_cov, col_cov, momentum, epsilon_rel, count,
            )?))
        }
        other => Err(Error::CorruptSnapshot(format!(
            "unknown snapshot kind {other:?}"
        ))),
    }
}

pub fn load_input_stats(path: &Path) -> Result<InputStats> {
    match load_stats(path)? {
        StatsSnapshot::Input(s) => Ok(s),
        StatsSnapshot::Weight(_) => Err(Error::CorruptSnapshot(
            "expected input_stats, found weight_stats".into(),
        )),
    }
}

pub fn load_weight_stats(path: &Path) -> Result<WeightStats> {
    match load_stats(path)? {
        StatsSnapshot::Weight(s) => Ok(s),
        StatsSnapshot::Input(_) => Err(Error::CorruptSnapshot(
            "expected weight_stats, found input_stats".into(),
        )),
    }
}
