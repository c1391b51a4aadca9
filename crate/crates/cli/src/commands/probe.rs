//! `quantprobe probe`: turn snapshots into a probe report.
//!
//! Error probing runs in parallel across layers (each layer's sampling is
//! seeded independently, so parallelism does not change results); throughput
//! is measured serially afterwards by the bench harness, or taken from an
//! injected table.

use rayon::prelude::*;
use std::path::Path;

use quantprobe_core::probe::{
    compare_distributions, layer_aggregates, probe_layer, save_report, summarize_comparison,
    Candidate, ComparisonRow, InputDistribution, ProbeOptions, ProbeReport, ReportConfig,
    ThroughputSource,
};
use quantprobe_core::snapshot::{load_input_stats, load_weight_stats};

use crate::commands::track::snapshot_paths;
use crate::config::PipelineConfig;
use crate::{throughput_table, CliError};

#[derive(Debug, Clone, Default)]
pub struct ProbeArgs {
    pub seed: Option<u64>,
    pub samples: Option<u32>,
    pub distribution: Option<InputDistribution>,
    pub throughput_table: Option<std::path::PathBuf>,
    pub compare_distributions: bool,
}

pub fn cmd_probe(
    config: &PipelineConfig,
    snapshots_dir: &Path,
    out_path: &Path,
    args: &ProbeArgs,
) -> Result<ProbeReport, CliError> {
    let candidates: Vec<Candidate> = config.candidates()?;
    let seed = args.seed.unwrap_or(config.seed);
    let samples = args.samples.unwrap_or(config.samples);
    let distribution = args.distribution.unwrap_or(InputDistribution::Learned);

    let (throughput, throughput_tag) = match &args.throughput_table {
        Some(path) => (
            ThroughputSource::Table(throughput_table::read_table(path)?),
            format!("table:{}", path.display()),
        ),
        None => (
            ThroughputSource::Measured {
                repetitions: config.bench.repetitions,
                warmup: config.bench.warmup,
            },
            "measured".to_string(),
        ),
    };
    let opts = ProbeOptions {
        samples,
        seed,
        distribution,
        throughput,
    };

    // load all snapshots up front so missing/corrupt files fail fast
    let mut layers = Vec::with_capacity(config.layers.len());
    for layer in &config.layers {
        let (input_path, weight_path) = snapshot_paths(snapshots_dir, &layer.spec.name);
        let in_stats = load_input_stats(&input_path)?;
        let w_stats = load_weight_stats(&weight_path)?;
        layers.push((layer.spec.clone(), in_stats, w_stats));
    }

    let per_layer: Vec<Result<_, quantprobe_core::Error>> = layers
        .par_iter()
        .map(|(spec, in_stats, w_stats)| probe_layer(spec, in_stats, w_stats, &candidates, &opts))
        .collect();
    let mut results = Vec::new();
    for r in per_layer {
        results.extend(r?);
    }

    let (comparison, comparison_summary) = if args.compare_distributions {
        let rows: Vec<Result<Vec<ComparisonRow>, quantprobe_core::Error>> = layers
            .par_iter()
            .map(|(spec, in_stats, w_stats)| {
                compare_distributions(spec, in_stats, w_stats, &candidates, &opts)
            })
            .collect();
        let mut all = Vec::new();
        for r in rows {
            all.extend(r?);
        }
        let summary = summarize_comparison(&all);
        (all, summary)
    } else {
        (Vec::new(), Vec::new())
    };

    let report = ProbeReport {
        config: ReportConfig {
            seed,
            samples,
            distribution,
            throughput_source: throughput_tag,
            dispatch: config.dispatch,
        },
        aggregates: layer_aggregates(&results),
        results,
        comparison,
        comparison_summary,
    };
    report.validate()?;
    save_report(&report, out_path)?;
    Ok(report)
}
