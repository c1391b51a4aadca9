//! Constrained candidate selection per (layer, direction).
//!
//! Candidates are filtered by accuracy (MERE strictly below the threshold)
//! and by a minimum speedup over the high-precision baseline (strictly
//! above); the fastest survivor wins, ties broken by the lexicographically
//! smallest candidate id. If nothing survives, the entry falls back to the
//! baseline. Forward and backward products of the same layer are decided
//! independently. A plan is static once built; applying it never re-decides.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gemm::{gemm_lowprec, gemm_ref_direction, GemmDirection};
use crate::matrix::Matrix;
use crate::probe::{Candidate, CandidateResult, ProbeReport, BASELINE_ID};
use crate::quant::RecipePair;

/// Which sampled MERE statistic the accuracy filter reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MereStatistic {
    Mean,
    Max,
}

/// Selection thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchConfig {
    /// Keep candidates with MERE strictly below this.
    pub mere_threshold: f64,
    /// Keep candidates strictly faster than this multiple of the baseline.
    pub min_speedup: f64,
    pub mere_statistic: MereStatistic,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        DispatchConfig {
            mere_threshold: 0.2,
            min_speedup: 1.05,
            mere_statistic: MereStatistic::Mean,
        }
    }
}

impl DispatchConfig {
    fn mere_of(&self, r: &CandidateResult) -> f64 {
        match self.mere_statistic {
            MereStatistic::Mean => r.mere,
            MereStatistic::Max => r.mere_max,
        }
    }
}

/// The chosen execution for one (layer, direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanChoice {
    Baseline,
    Candidate {
        id: String,
        recipes: RecipePair,
        /// Evidence from the report: the filtered MERE statistic and speedup.
        mere: f64,
        speedup: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub layer: String,
    pub direction: GemmDirection,
    pub choice: PlanChoice,
}

/// Where a plan came from: the report it was built from and the thresholds
/// in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub report_sha256: String,
    pub config: DispatchConfig,
    /// Seconds since the Unix epoch; honors `SOURCE_DATE_EPOCH` upstream.
    pub created_unix: u64,
}

/// Per-layer, per-direction chosen candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchPlan {
    pub entries: Vec<PlanEntry>,
    pub provenance: Provenance,
}

impl DispatchPlan {
    pub fn entry(&self, layer: &str, direction: GemmDirection) -> Option<&PlanEntry> {
        self.entries
            .iter()
            .find(|e| e.layer == layer && e.direction == direction)
    }
}

/// Container kind for persisted plans.
pub const PLAN_KIND: &str = "dispatch_plan";

pub fn save_plan(plan: &DispatchPlan, path: &std::path::Path) -> Result<()> {
    crate::container::write_json_document(path, PLAN_KIND, plan)
}

pub fn load_plan(path: &std::path::Path) -> Result<(DispatchPlan, String)> {
    crate::container::read_json_document(path, PLAN_KIND)
}

/// Accuracy and speedup filter. Baseline rows are not candidates and are
/// always dropped here; they are the fallback, not a choice.
pub fn filter_candidates<'a>(
    results: &'a [CandidateResult],
    cfg: &DispatchConfig,
) -> Vec<&'a CandidateResult> {
    results
        .iter()
        .filter(|r| r.candidate_id != BASELINE_ID)
        .filter(|r| cfg.mere_of(r) < cfg.mere_threshold && r.speedup_vs_baseline > cfg.min_speedup)
        .collect()
}

/// Picks the winner among `results` (all sharing one layer and direction):
/// highest throughput among filtered candidates, ties to the smallest id,
/// `None` when everything is filtered (baseline fallback).
pub fn select<'a>(
    results: &'a [CandidateResult],
    cfg: &DispatchConfig,
) -> Option<&'a CandidateResult> {
    filter_candidates(results, cfg)
        .into_iter()
        .min_by(|a, b| {
            b.throughput
                .elements_per_second
                .partial_cmp(&a.throughput.elements_per_second)
                .unwrap()
                .then_with(|| a.candidate_id.cmp(&b.candidate_id))
        })
}

/// Builds the full plan from a report: independent selection per
/// (layer, direction), with provenance embedded.
///
/// `candidates` supplies the recipes of chosen ids; a chosen candidate that
/// leaves its direction in high precision is not eligible (it is the
/// baseline kernel), and a chosen id missing from `candidates` is a
/// malformed report.
pub fn build_plan(
    report: &ProbeReport,
    candidates: &[Candidate],
    cfg: &DispatchConfig,
    report_sha256: &str,
    created_unix: u64,
) -> Result<DispatchPlan> {
    report.validate()?;
    let by_id: BTreeMap<&str, &Candidate> =
        candidates.iter().map(|c| (c.id.as_str(), c)).collect();

    let mut groups: BTreeMap<(String, GemmDirection), Vec<CandidateResult>> = BTreeMap::new();
    for r in &report.results {
        groups
            .entry((r.layer.clone(), r.direction))
            .or_default()
            .push(r.clone());
    }

    let mut entries = Vec::with_capacity(groups.len());
    for ((layer, direction), mut rows) in groups {
        // only candidates that actually quantize this direction are eligible
        rows.retain(|r| {
            r.candidate_id == BASELINE_ID
                || by_id
                    .get(r.candidate_id.as_str())
                    .is_some_and(|c| c.recipes_for(direction).is_some())
        });
        let choice = match select(&rows, cfg) {
            None => PlanChoice::Baseline,
            Some(winner) => {
                let cand = by_id.get(winner.candidate_id.as_str()).ok_or_else(|| {
                    Error::MalformedReport(format!(
                        "result references unknown candidate {:?}",
                        winner.candidate_id
                    ))
                })?;
                let recipes = cand
                    .recipes_for(direction)
                    .expect("retained rows have recipes")
                    .clone();
                PlanChoice::Candidate {
                    id: winner.candidate_id.clone(),
                    recipes,
                    mere: cfg.mere_of(winner),
                    speedup: winner.speedup_vs_baseline,
                }
            }
        };
        entries.push(PlanEntry {
            layer,
            direction,
            choice,
        });
    }

    Ok(DispatchPlan {
        entries,
        provenance: Provenance {
            report_sha256: report_sha256.to_string(),
            config: *cfg,
            created_unix,
        },
    })
}

/// Routes one GEMM through the plan: the chosen low-precision recipe pair,
/// or the high-precision reference for baseline entries.
pub fn apply_plan(
    plan: &DispatchPlan,
    layer: &str,
    lhs: &Matrix<f32>,
    rhs: &Matrix<f32>,
    direction: GemmDirection,
) -> Result<Matrix<f32>> {
    let entry = plan
        .entry(layer, direction)
        .ok_or_else(|| Error::MissingPlanEntry {
            layer: layer.to_string(),
            direction: direction.to_string(),
        })?;
    match &entry.choice {
        PlanChoice::Baseline => gemm_ref_direction(lhs, rhs, direction),
        PlanChoice::Candidate { recipes, .. } => {
            gemm_lowprec(lhs, rhs, &recipes.lhs, &recipes.rhs, direction)
        }
    }
}
