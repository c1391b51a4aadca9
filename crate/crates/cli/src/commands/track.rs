//! `quantprobe track`: run the synthetic training loop, update the trackers
//! on the probe cadence, and persist snapshots.
//!
//! Trackers touch 1-in-`activate_every` iterations; at every
//! `snapshot_every`-th iteration the current state of every layer is written
//! (the latest snapshot overwrites the previous one, as a trainer would).
//! All draws are keyed by (seed, layer, iteration), so reruns with the same
//! seed and config produce bit-identical snapshot files.

use serde::{Deserialize, Serialize};
use std::path::Path;

use quantprobe_core::matnormal::WeightStats;
use quantprobe_core::rng::{hash_str, stream_id, Rng};
use quantprobe_core::snapshot::{save_input_stats, save_weight_stats};
use quantprobe_core::synth::{InputGenerator, WeightGenerator};
use quantprobe_core::welford::InputStats;

use crate::config::PipelineConfig;
use crate::CliError;

/// Counters and file list; written as `track_summary.json` next to the
/// snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub seed: u64,
    pub iterations: u64,
    /// Number of iterations on which the trackers ran.
    pub activations: u64,
    /// Number of snapshot events (each writes every layer's state).
    pub snapshot_writes: u64,
    pub layers: Vec<String>,
    pub files: Vec<String>,
}

impl TrackSummary {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("summary {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("summary parse: {e}")))
    }
}

pub fn snapshot_paths(out_dir: &Path, layer: &str) -> (std::path::PathBuf, std::path::PathBuf) {
    (
        out_dir.join(format!("{layer}.input.qpdoc")),
        out_dir.join(format!("{layer}.weight.qpdoc")),
    )
}

struct LayerTracker {
    name: String,
    input_gen: InputGenerator,
    weight_gen: WeightGenerator,
    input_stats: InputStats,
    weight_stats: WeightStats,
    batch: usize,
}

pub fn cmd_track(
    config: &PipelineConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<TrackSummary, CliError> {
    let seed = seed_override.unwrap_or(config.seed);
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut trackers = Vec::with_capacity(config.layers.len());
    for layer in &config.layers {
        let spec = &layer.spec;
        trackers.push(LayerTracker {
            name: spec.name.clone(),
            input_gen: InputGenerator::new(layer.input_gen, spec.in_features)?,
            weight_gen: WeightGenerator::new(
                layer.weight_gen,
                spec.out_features,
                spec.in_features,
            ),
            input_stats: InputStats::new(spec.in_features),
            weight_stats: WeightStats::new(
                spec.out_features,
                spec.in_features,
                config.tracker.momentum,
                config.tracker.epsilon_rel,
            ),
            batch: spec.batch,
        });
    }

    let schedule = &config.schedule;
    let mut activations = 0u64;
    let mut snapshot_writes = 0u64;

    for iteration in 1..=config.track.iterations {
        if schedule.is_activation(iteration) {
            activations += 1;
            for t in trackers.iter_mut() {
                let tag = hash_str(&t.name);
                let mut input_rng =
                    Rng::from_seed_stream(seed, stream_id(&[tag, 0, iteration]));
                let batch = t.input_gen.batch(t.batch, &mut input_rng);
                t.input_stats.update(&batch)?;

                let mut weight_rng =
                    Rng::from_seed_stream(seed, stream_id(&[tag, 1, iteration]));
                let w = t.weight_gen.matrix(&mut weight_rng);
                t.weight_stats.update(&w)?;
            }
        }
        if schedule.is_snapshot(iteration) {
            snapshot_writes += 1;
            for t in &trackers {
                let (input_path, weight_path) = snapshot_paths(out_dir, &t.name);
                save_input_stats(&t.input_stats, &input_path)?;
                save_weight_stats(&t.weight_stats, &weight_path)?;
            }
        }
    }

    // flush the final state when the run did not end on a snapshot boundary
    if config.track.iterations % schedule.snapshot_every != 0 {
        for t in &trackers {
            let (input_path, weight_path) = snapshot_paths(out_dir, &t.name);
            save_input_stats(&t.input_stats, &input_path)?;
            save_weight_stats(&t.weight_stats, &weight_path)?;
        }
    }

    let mut files = Vec::new();
    for t in &trackers {
        let (input_path, weight_path) = snapshot_paths(out_dir, &t.name);
        files.push(input_path.display().to_string());
        files.push(weight_path.display().to_string());
    }
    let summary = TrackSummary {
        seed,
        iterations: config.track.iterations,
        activations,
        snapshot_writes,
        layers: trackers.iter().map(|t| t.name.clone()).collect(),
        files,
    };
    let summary_path = out_dir.join("track_summary.json");
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Data(format!("summary serialization: {e}")))?;
    std::fs::write(&summary_path, text)
        .map_err(|e| CliError::Data(format!("summary write: {e}")))?;
    Ok(summary)
}
