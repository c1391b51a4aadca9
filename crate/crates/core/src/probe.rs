//! Offline error and throughput quantification.
//!
//! For each (layer, direction, candidate) the probe draws sampled
//! (input, weight) pairs from the tracked distributions, compares the
//! low-precision GEMM against the high-precision reference with MERE, and
//! attaches a throughput figure, either measured on the host kernels or
//! injected from an external table. Error sampling is deterministic for a
//! fixed seed; every (layer, direction) also gets a baseline row with MERE 0
//! and speedup 1.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::bench::{bench_throughput, ThroughputSample};
use crate::dispatch::DispatchConfig;
use crate::error::{Error, Result};
use crate::gemm::{gemm_lowprec, gemm_ref_direction, GemmDirection, LayerSpec};
use crate::linalg::cholesky_jittered;
use crate::matnormal::WeightStats;
use crate::matrix::Matrix;
use crate::metrics::{geomean_mere, mere};
use crate::quant::RecipePair;
use crate::rng::{hash_str, stream_id, Rng};
use crate::sampling::{sample_gaussian_rows, sample_weight};
use crate::welford::InputStats;

/// Candidate id reserved for the high-precision fallback row.
pub const BASELINE_ID: &str = "baseline";

/// Default number of sampled (input, weight) pairs per layer.
pub const DEFAULT_SAMPLES: u32 = 50;

/// A named execution scheme: one optional recipe pair per GEMM direction.
/// `None` for a direction means the candidate runs that direction in high
/// precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub forward: Option<RecipePair>,
    pub backward_input: Option<RecipePair>,
    pub backward_weight: Option<RecipePair>,
}

impl Candidate {
    pub fn recipes_for(&self, direction: GemmDirection) -> Option<&RecipePair> {
        match direction {
            GemmDirection::Forward => self.forward.as_ref(),
            GemmDirection::BackwardInputGrad => self.backward_input.as_ref(),
            GemmDirection::BackwardWeightGrad => self.backward_weight.as_ref(),
        }
    }
}

/// Which distribution inputs are drawn from during probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    /// Sample from the tracked (learned) statistics.
    Learned,
    /// Sample from N(0, I), the conventional benchmark distribution.
    StandardNormal,
}

/// Externally supplied throughput rates keyed by (layer, direction,
/// candidate id). Rates are multiply-accumulates per second.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThroughputTable {
    entries: BTreeMap<String, f64>,
}

impl ThroughputTable {
    pub fn insert(&mut self, layer: &str, direction: GemmDirection, candidate: &str, rate: f64) {
        self.entries.insert(Self::key(layer, direction, candidate), rate);
    }

    pub fn get(&self, layer: &str, direction: GemmDirection, candidate: &str) -> Option<f64> {
        self.entries.get(&Self::key(layer, direction, candidate)).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(layer: &str, direction: GemmDirection, candidate: &str) -> String {
        format!("{layer}\t{direction}\t{candidate}")
    }
}

/// Where throughput figures come from.
#[derive(Debug, Clone)]
pub enum ThroughputSource {
    /// Time the software kernels on this host.
    Measured { repetitions: u32, warmup: u32 },
    /// Look rates up in an injected table; missing entries are an error.
    Table(ThroughputTable),
    /// Skip throughput entirely (error-only probes); rates are reported as
    /// the baseline rate so speedups come out 1.
    Skip,
}

impl Default for ThroughputSource {
    fn default() -> Self {
        ThroughputSource::Measured {
            repetitions: 5,
            warmup: 2,
        }
    }
}

/// Probe run options.
#[derive(Debug, Clone)]
pub struct ProbeOptions {
    pub samples: u32,
    pub seed: u64,
    pub distribution: InputDistribution,
    pub throughput: ThroughputSource,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            distribution: InputDistribution::Learned,
            throughput: ThroughputSource::default(),
        }
    }
}

/// Per-(layer, direction, candidate) probe outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub layer: String,
    pub direction: GemmDirection,
    pub candidate_id: String,
    /// Sample-mean MERE against the high-precision reference.
    pub mere: f64,
    /// Worst-sample MERE.
    pub mere_max: f64,
    pub throughput: ThroughputSample,
    pub speedup_vs_baseline: f64,
    pub sample_count: u32,
}

/// Per-(layer, direction) rollup of the non-baseline candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAggregate {
    pub layer: String,
    pub direction: GemmDirection,
    pub geomean_mere: f64,
    pub best_speedup: f64,
}

/// Paired learned-vs-normal MERE for one (layer, direction, candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub layer: String,
    pub direction: GemmDirection,
    pub candidate_id: String,
    pub mere_learned: f64,
    pub mere_normal: f64,
    /// learned / normal
    pub ratio: f64,
}

/// Cross-layer geometric means of the paired comparison, one row per
/// (candidate, direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub candidate_id: String,
    pub direction: GemmDirection,
    pub geomean_learned: f64,
    pub geomean_normal: f64,
    pub ratio: f64,
}

/// Configuration echo embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub seed: u64,
    pub samples: u32,
    pub distribution: InputDistribution,
    /// "measured", "table", or "skip"
    pub throughput_source: String,
    pub dispatch: DispatchConfig,
}

/// The probe's output document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub config: ReportConfig,
    pub results: Vec<CandidateResult>,
    pub aggregates: Vec<LayerAggregate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison: Vec<ComparisonRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparison_summary: Vec<ComparisonSummary>,
}

impl ProbeReport {
    /// Checks the report's structural invariant: every (layer, direction)
    /// has exactly one baseline row with speedup 1.
    pub fn validate(&self) -> Result<()> {
        let mut groups: BTreeMap<(String, String), u32> = BTreeMap::new();
        for r in &self.results {
            if r.candidate_id == BASELINE_ID {
                if r.speedup_vs_baseline != 1.0 {
                    return Err(Error::MalformedReport(format!(
                        "baseline speedup must be 1.0 for {}/{}",
                        r.layer, r.direction
                    )));
                }
                *groups.entry((r.layer.clone(), r.direction.to_string())).or_insert(0) += 1;
            }
        }
        for r in &self.results {
            let key = (r.layer.clone(), r.direction.to_string());
            match groups.get(&key) {
                Some(1) => {}
                Some(n) => {
                    return Err(Error::MalformedReport(format!(
                        "{} baseline rows for {}/{}",
                        n, r.layer, r.direction
                    )))
                }
                None => {
                    return Err(Error::MalformedReport(format!(
                        "missing baseline row for {}/{}",
                        r.layer, r.direction
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Container kind for persisted reports.
pub const REPORT_KIND: &str = "probe_report";

/// Writes a report to the shared container format.
pub fn save_report(report: &ProbeReport, path: &std::path::Path) -> Result<()> {
    crate::container::write_json_document(path, REPORT_KIND, report)
}

/// Reads a report back, returning it with the file's content hash.
pub fn load_report(path: &std::path::Path) -> Result<(ProbeReport, String)> {
    crate::container::read_json_document(path, REPORT_KIND)
}

/// Sampled error statistics for one (direction, candidate).
struct ErrorStats {
    mean: f64,
    max: f64,
}

/// Draws the operand pair for one (direction, sample) slot.
///
/// Inputs come from the configured distribution, weights from the tracked
/// matrix-normal; upstream gradients are iid standard normal.
fn draw_operands(
    spec: &LayerSpec,
    input_factor: Option<&(Vec<f64>, Matrix<f64>)>,
    w_stats: &WeightStats,
    direction: GemmDirection,
    rng: &mut Rng,
) -> Result<(Matrix<f32>, Matrix<f32>)> {
    let (b, k, n) = (spec.batch, spec.in_features, spec.out_features);
    let input = |rng: &mut Rng| -> Matrix<f32> {
        match input_factor {
            Some((mean, factor)) => sample_gaussian_rows(mean, factor, b, rng),
            None => rng.normal_matrix(b, k),
        }
    };
    Ok(match direction {
        GemmDirection::Forward => {
            let x = input(rng);
            let w = sample_weight(w_stats, rng)?;
            (x, w)
        }
        GemmDirection::BackwardInputGrad => {
            let dy = rng.normal_matrix(b, n);
            let w = sample_weight(w_stats, rng)?;
            (dy, w)
        }
        GemmDirection::BackwardWeightGrad => {
            let dy = rng.normal_matrix(b, n);
            let x = input(rng);
            (dy, x)
        }
    })
}

/// Per-candidate sampled MERE statistics for every direction of one layer.
/// Entry `[direction][candidate]` is `None` when the candidate leaves that
/// direction in high precision.
fn sampled_errors(
    spec: &LayerSpec,
    in_stats: &InputStats,
    w_stats: &WeightStats,
    candidates: &[Candidate],
    opts: &ProbeOptions,
) -> Result<Vec<Vec<Option<ErrorStats>>>> {
    if opts.samples == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    // pre-factor the learned input covariance once per layer
    let input_factor = match opts.distribution {
        InputDistribution::Learned => {
            let sigma = in_stats.covariance()?;
            let factor = cholesky_jittered(&sigma, crate::matnormal::DEFAULT_EPSILON_REL)?;
            Some((in_stats.mean().to_vec(), factor))
        }
        InputDistribution::StandardNormal => None,
    };

    let layer_tag = hash_str(&spec.name);
    let mut all = Vec::with_capacity(GemmDirection::ALL.len());
    for (d_idx, &direction) in GemmDirection::ALL.iter().enumerate() {
        let mut sums = vec![0.0f64; candidates.len()];
        let mut maxes = vec![0.0f64; candidates.len()];
        for s in 0..opts.samples {
            let mut rng = Rng::from_seed_stream(
                opts.seed,
                stream_id(&[layer_tag, d_idx as u64, s as u64]),
            );
            let (lhs, rhs) = draw_operands(spec, input_factor.as_ref(), w_stats, direction, &mut rng)?;
            let reference = gemm_ref_direction(&lhs, &rhs, direction)?;
            for (c_idx, cand) in candidates.iter().enumerate() {
                if let Some(pair) = cand.recipes_for(direction) {
                    let out = gemm_lowprec(&lhs, &rhs, &pair.lhs, &pair.rhs, direction)?;
                    let e = mere(&out, &reference)?;
                    sums[c_idx] += e;
                    maxes[c_idx] = maxes[c_idx].max(e);
                }
            }
        }
        all.push(
            candidates
                .iter()
                .enumerate()
                .map(|(c_idx, cand)| {
                    cand.recipes_for(direction).map(|_| ErrorStats {
                        mean: sums[c_idx] / opts.samples as f64,
                        max: maxes[c_idx],
                    })
                })
                .collect(),
        );
    }
    Ok(all)
}

fn throughput_for(
    source: &ThroughputSource,
    spec: &LayerSpec,
    direction: GemmDirection,
    candidate_id: &str,
    recipes: Option<&RecipePair>,
    baseline_rate: Option<f64>,
) -> Result<ThroughputSample> {
    match source {
        ThroughputSource::Measured { repetitions, warmup } => {
            bench_throughput(spec, recipes, direction, *repetitions, *warmup)
        }
        ThroughputSource::Table(table) => {
            let rate = table
                .get(&spec.name, direction, candidate_id)
                .ok_or_else(|| {
                    Error::InvalidThroughputTable(format!(
                        "no entry for {}/{}/{}",
                        spec.name, direction, candidate_id
                    ))
                })?;
            Ok(ThroughputSample::from_rate(rate, spec.mac_count()))
        }
        ThroughputSource::Skip => {
            let rate = baseline_rate.unwrap_or(1.0);
            Ok(ThroughputSample::from_rate(rate, spec.mac_count()))
        }
    }
}

/// Probes one layer: sampled MERE plus throughput per candidate and
/// direction, including the baseline rows.
pub fn probe_layer(
    spec: &LayerSpec,
    in_stats: &InputStats,
    w_stats: &WeightStats,
    candidates: &[Candidate],
    opts: &ProbeOptions,
) -> Result<Vec<CandidateResult>> {
    let errors = sampled_errors(spec, in_stats, w_stats, candidates, opts)?;

    let mut results = Vec::new();
    for (d_idx, &direction) in GemmDirection::ALL.iter().enumerate() {
        let baseline_tp =
            throughput_for(&opts.throughput, spec, direction, BASELINE_ID, None, None)?;
        let baseline_rate = baseline_tp.elements_per_second;
        results.push(CandidateResult {
            layer: spec.name.clone(),
            direction,
            candidate_id: BASELINE_ID.into(),
            mere: 0.0,
            mere_max: 0.0,
            throughput: baseline_tp,
            speedup_vs_baseline: 1.0,
            sample_count: opts.samples,
        });
        for (c_idx, cand) in candidates.iter().enumerate() {
            let recipes = cand.recipes_for(direction);
            let tp = throughput_for(
                &opts.throughput,
                spec,
                direction,
                &cand.id,
                recipes,
                Some(baseline_rate),
            )?;
            let (mere_mean, mere_max) = match &errors[d_idx][c_idx] {
                Some(stats) => (stats.mean, stats.max),
                // high-precision direction: identical to the reference kernel
                None => (0.0, 0.0),
            };
            results.push(CandidateResult {
                layer: spec.name.clone(),
                direction,
                candidate_id: cand.id.clone(),
                mere: mere_mean,
                mere_max,
                speedup_vs_baseline: tp.elements_per_second / baseline_rate,
                throughput: tp,
                sample_count: opts.samples,
            });
        }
    }
    Ok(results)
}

/// Probes the same layer twice, sampling inputs from the learned statistics
/// and from N(0, I), and reports the paired MEREs per candidate.
pub fn compare_distributions(
    spec: &LayerSpec,
    in_stats: &InputStats,
    w_stats: &WeightStats,
    candidates: &[Candidate],
    opts: &ProbeOptions,
) -> Result<Vec<ComparisonRow>> {
    let learned = sampled_errors(
        spec,
        in_stats,
        w_stats,
        candidates,
        &ProbeOptions {
            distribution: InputDistribution::Learned,
            ..opts.clone()
        },
    )?;
    let normal = sampled_errors(
        spec,
        in_stats,
        w_stats,
        candidates,
        &ProbeOptions {
            distribution: InputDistribution::StandardNormal,
            ..opts.clone()
        },
    )?;

    let mut rows = Vec::new();
    for (d_idx, &direction) in GemmDirection::ALL.iter().enumerate() {
        for (c_idx, cand) in candidates.iter().enumerate() {
            if let (Some(l), Some(n)) = (&learned[d_idx][c_idx], &normal[d_idx][c_idx]) {
                rows.push(ComparisonRow {
                    layer: spec.name.clone(),
                    direction,
                    candidate_id: cand.id.clone(),
                    mere_learned: l.mean,
                    mere_normal: n.mean,
                    ratio: l.mean / n.mean.max(f64::MIN_POSITIVE),
                });
            }
        }
    }
    Ok(rows)
}

/// Rolls comparison rows up into per-(candidate, direction) geometric means
/// across layers.
pub fn summarize_comparison(rows: &[ComparisonRow]) -> Vec<ComparisonSummary> {
    let mut grouped: BTreeMap<(String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let entry = grouped
            .entry((r.candidate_id.clone(), r.direction.to_string()))
            .or_default();
        entry.0.push(r.mere_learned);
        entry.1.push(r.mere_normal);
    }
    grouped
        .into_iter()
        .map(|((candidate_id, dir), (learned, normal))| {
            let geomean_learned = geomean_mere(&learned).expect("non-empty");
            let geomean_normal = geomean_mere(&normal).expect("non-empty");
            ComparisonSummary {
                candidate_id,
                direction: dir.parse().expect("direction roundtrip"),
                geomean_learned,
                geomean_normal,
                ratio: geomean_learned / geomean_normal,
            }
        })
        .collect()
}

/// Per-(layer, direction) aggregates over the non-baseline candidate rows.
pub fn layer_aggregates(results: &[CandidateResult]) -> Vec<LayerAggregate> {
    let mut grouped: BTreeMap<(String, String), (Vec<f64>, f64)> = BTreeMap::new();
    for r in results {
        if r.candidate_id == BASELINE_ID {
            continue;
        }
        let entry = grouped
            .entry((r.layer.clone(), r.direction.to_string()))
            .or_insert((Vec::new(), 0.0));
        entry.0.push(r.mere);
        entry.1 = entry.1.max(r.speedup_vs_baseline);
    }
    grouped
        .into_iter()
        .map(|((layer, dir), (meres, best))| LayerAggregate {
            layer,
            direction: dir.parse().expect("direction roundtrip"),
            geomean_mere: geomean_mere(&meres).unwrap_or(0.0),
            best_speedup: best,
        })
        .collect()
}
