//! Flat CSV exports of reports and plans, plus the human-readable text
//! rendering used by `quantprobe report`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use quantprobe_core::dispatch::{DispatchPlan, PlanChoice};
use quantprobe_core::metrics::geomean_mere;
use quantprobe_core::probe::{ProbeReport, BASELINE_ID};

use crate::CliError;

/// One report row: layer x direction x candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCsvRow {
    pub layer: String,
    pub direction: String,
    pub candidate_id: String,
    pub mere_mean: f64,
    pub mere_max: f64,
    pub elements_per_second: f64,
    pub median_latency_s: f64,
    pub repetitions: u32,
    pub speedup_vs_baseline: f64,
    pub sample_count: u32,
}

pub fn write_report_csv(report: &ProbeReport, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("csv {}: {e}", path.display())))?;
    for r in &report.results {
        writer
            .serialize(ReportCsvRow {
                layer: r.layer.clone(),
                direction: r.direction.to_string(),
                candidate_id: r.candidate_id.clone(),
                mere_mean: r.mere,
                mere_max: r.mere_max,
                elements_per_second: r.throughput.elements_per_second,
                median_latency_s: r.throughput.median_latency,
                repetitions: r.throughput.repetitions,
                speedup_vs_baseline: r.speedup_vs_baseline,
                sample_count: r.sample_count,
            })
            .map_err(|e| CliError::Data(format!("csv write: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportCsvRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("csv {}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Data(format!("csv row: {e}"))))
        .collect()
}

/// One plan row: the chosen candidate with its evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCsvRow {
    pub layer: String,
    pub direction: String,
    pub choice: String,
    pub mere: f64,
    pub speedup: f64,
}

pub fn write_plan_csv(plan: &DispatchPlan, path: &Path) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("csv {}: {e}", path.display())))?;
    for e in &plan.entries {
        let row = match &e.choice {
            PlanChoice::Baseline => PlanCsvRow {
                layer: e.layer.clone(),
                direction: e.direction.to_string(),
                choice: BASELINE_ID.into(),
                mere: 0.0,
                speedup: 1.0,
            },
            PlanChoice::Candidate {
                id, mere, speedup, ..
            } => PlanCsvRow {
                layer: e.layer.clone(),
                direction: e.direction.to_string(),
                choice: id.clone(),
                mere: *mere,
                speedup: *speedup,
            },
        };
        writer
            .serialize(row)
            .map_err(|e| CliError::Data(format!("csv write: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("csv flush: {e}")))?;
    Ok(())
}

pub fn read_plan_csv(path: &Path) -> Result<Vec<PlanCsvRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("csv {}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| CliError::Data(format!("csv row: {e}"))))
        .collect()
}

/// Cross-layer geometric-mean MERE per (candidate, direction); the rendered
/// equivalent of the per-layer rows, one aggregate line per candidate.
pub fn candidate_geomeans(report: &ProbeReport) -> Vec<(String, String, f64)> {
    let mut grouped: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in &report.results {
        if r.candidate_id == BASELINE_ID {
            continue;
        }
        grouped
            .entry((r.candidate_id.clone(), r.direction.to_string()))
            .or_default()
            .push(r.mere);
    }
    grouped
        .into_iter()
        .map(|((id, dir), meres)| {
            let g = geomean_mere(&meres).expect("non-empty group");
            (id, dir, g)
        })
        .collect()
}

pub fn render_report(report: &ProbeReport) -> String {
    let mut out = String::new();
    if report.results.is_empty() {
        out.push_str("no results\n");
        return out;
    }
    let _ = writeln!(
        out,
        "probe report: seed {} | {} samples/layer | distribution {:?} | throughput {}",
        report.config.seed,
        report.config.samples,
        report.config.distribution,
        report.config.throughput_source
    );
    let _ = writeln!(
        out,
        "{:<20} {:<16} {:<12} {:>10} {:>10} {:>14} {:>9}",
        "layer", "direction", "candidate", "mere", "mere_max", "elems/s", "speedup"
    );
    for r in &report.results {
        let _ = writeln!(
            out,
            "{:<20} {:<16} {:<12} {:>10.4} {:>10.4} {:>14.3e} {:>9.3}",
            r.layer,
            r.direction.to_string(),
            r.candidate_id,
            r.mere,
            r.mere_max,
            r.throughput.elements_per_second,
            r.speedup_vs_baseline
        );
    }

    out.push('\n');
    let _ = writeln!(out, "geomean MERE across layers:");
    for (id, dir, g) in candidate_geomeans(report) {
        let _ = writeln!(out, "{:<12} {:<16} {:>10.4}", id, dir, g);
    }

    if !report.comparison_summary.is_empty() {
        out.push('\n');
        let _ = writeln!(
            out,
            "distribution sensitivity (geomean MERE, learned vs standard normal):"
        );
        let _ = writeln!(
            out,
            "{:<12} {:<16} {:>10} {:>10} {:>8}",
            "candidate", "direction", "learned", "normal", "ratio"
        );
        for s in &report.comparison_summary {
            let _ = writeln!(
                out,
                "{:<12} {:<16} {:>10.4} {:>10.4} {:>8.3}",
                s.candidate_id,
                s.direction.to_string(),
                s.geomean_learned,
                s.geomean_normal,
                s.ratio
            );
        }
    }
    out
}

pub fn render_plan(plan: &DispatchPlan) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dispatch plan: report {} | mere < {} | speedup > {} | created {}",
        &plan.provenance.report_sha256[..12.min(plan.provenance.report_sha256.len())],
        plan.provenance.config.mere_threshold,
        plan.provenance.config.min_speedup,
        plan.provenance.created_unix
    );
    let _ = writeln!(
        out,
        "{:<20} {:<16} {:<14} {:>10} {:>9}",
        "layer", "direction", "choice", "mere", "speedup"
    );
    for e in &plan.entries {
        match &e.choice {
            PlanChoice::Baseline => {
                let _ = writeln!(
                    out,
                    "{:<20} {:<16} {:<14} {:>10} {:>9}",
                    e.layer,
                    e.direction.to_string(),
                    BASELINE_ID,
                    "-",
                    "-"
                );
            }
            PlanChoice::Candidate {
                id, mere, speedup, ..
            } => {
                let _ = writeln!(
                    out,
                    "{:<20} {:<16} {:<14} {:>10.4} {:>9.3}",
                    e.layer,
                    e.direction.to_string(),
                    id,
                    mere,
                    speedup
                );
            }
        }
    }
    out
}
