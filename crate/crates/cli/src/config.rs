//! Pipeline configuration: a single TOML document covering layers,
//! candidate recipes, tracker settings, probe cadence and dispatch
//! thresholds.

use serde::{Deserialize, Serialize};
use std::path::Path;

use quantprobe_core::dispatch::DispatchConfig;
use quantprobe_core::gemm::LayerSpec;
use quantprobe_core::matnormal::{DEFAULT_EPSILON_REL, DEFAULT_MOMENTUM};
use quantprobe_core::mods::BlockNormConfig;
use quantprobe_core::probe::Candidate;
use quantprobe_core::quant::{QuantRecipe, RecipePair};
use quantprobe_core::schedule::ProbeSchedule;
use quantprobe_core::synth::{InputGenKind, WeightGenKind};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSection {
    pub iterations: u64,
}

impl Default for TrackSection {
    fn default() -> Self {
        TrackSection { iterations: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSection {
    pub momentum: f64,
    pub epsilon_rel: f64,
}

impl Default for TrackerSection {
    fn default() -> Self {
        TrackerSection {
            momentum: DEFAULT_MOMENTUM,
            epsilon_rel: DEFAULT_EPSILON_REL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSection {
    pub repetitions: u32,
    pub warmup: u32,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            repetitions: 5,
            warmup: 2,
        }
    }
}

/// One layer plus the synthetic distributions that stand in for its
/// training traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    #[serde(flatten)]
    pub spec: LayerSpec,
    #[serde(default)]
    pub input_gen: InputGenKind,
    #[serde(default)]
    pub weight_gen: WeightGenKind,
}

/// Recipe strings for the two operands of one direction,
/// e.g. `{ lhs = "e5m2:rowwise", rhs = "e4m3:blockwise:128x128" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipePairConfig {
    pub lhs: String,
    pub rhs: String,
}

impl RecipePairConfig {
    fn parse(&self) -> Result<RecipePair, String> {
        Ok(RecipePair {
            lhs: self.lhs.parse::<QuantRecipe>()?,
            rhs: self.rhs.parse::<QuantRecipe>()?,
        })
    }
}

/// A named candidate; omitted directions run in high precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<RecipePairConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_input: Option<RecipePairConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_weight: Option<RecipePairConfig>,
}

impl CandidateConfig {
    pub fn to_candidate(&self) -> Result<Candidate, String> {
        let parse = |p: &Option<RecipePairConfig>| -> Result<Option<RecipePair>, String> {
            p.as_ref().map(|c| c.parse()).transpose()
        };
        Ok(Candidate {
            id: self.id.clone(),
            forward: parse(&self.forward)?,
            backward_input: parse(&self.backward_input)?,
            backward_weight: parse(&self.backward_weight)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub samples: u32,
    #[serde(default)]
    pub schedule: ProbeSchedule,
    #[serde(default)]
    pub track: TrackSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub dispatch: DispatchConfig,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub mods: BlockNormConfig,
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub candidates: Vec<CandidateConfig>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |msg: String| Err(CliError::Usage(msg));
        if self.samples == 0 {
            return usage("samples must be >= 1".into());
        }
        if self.layers.is_empty() {
            return usage("at least one layer is required".into());
        }
        self.schedule
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if !(0.0..1.0).contains(&self.tracker.momentum) {
            return usage(format!("momentum {} out of [0, 1)", self.tracker.momentum));
        }
        if self.dispatch.mere_threshold <= 0.0 {
            return usage("mere_threshold must be positive".into());
        }
        if self.dispatch.min_speedup < 1.0 {
            return usage("min_speedup must be >= 1".into());
        }
        if self.bench.repetitions < 3 {
            return usage("bench repetitions must be >= 3".into());
        }

        let mut names: Vec<&str> = self.layers.iter().map(|l| l.spec.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.layers.len() {
            return usage("layer names must be unique".into());
        }
        for l in &self.layers {
            if l.spec.batch == 0 || l.spec.in_features == 0 || l.spec.out_features == 0 {
                return usage(format!("layer {:?} has a zero dimension", l.spec.name));
            }
        }

        let mut ids: Vec<&str> = self.candidates.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.candidates.len() {
            return usage("candidate ids must be unique".into());
        }
        for c in &self.candidates {
            if c.id == quantprobe_core::probe::BASELINE_ID {
                return usage("candidate id 'baseline' is reserved".into());
            }
            c.to_candidate()
                .map_err(|e| CliError::Usage(format!("candidate {:?}: {e}", c.id)))?;
        }
        Ok(())
    }

    pub fn candidates(&self) -> Result<Vec<Candidate>, CliError> {
        self.candidates
            .iter()
            .map(|c| {
                c.to_candidate()
                    .map_err(|e| CliError::Usage(format!("candidate {:?}: {e}", c.id)))
            })
            .collect()
    }
}

/// The generated example configuration: every default spelled out.
pub const EXAMPLE_CONFIG: &str = r#"# quantprobe pipeline configuration
#
# Pipeline: track -> probe -> dispatch -> report. All stages are driven by
# this one file; seeds pin every random draw, so reruns are reproducible.

# Root seed for tracking and probing.
seed = 42

# Sampled (input, weight) pairs per layer during probing.
samples = 50

[schedule]
# Trackers run every `activate_every` training iterations and persist their
# state every `snapshot_every` iterations (must be a multiple).
activate_every = 100
snapshot_every = 10000

[track]
# Synthetic training iterations to run in `quantprobe track`.
iterations = 10000

[tracker]
# EMA momentum of the weight tracker (stable range 0.9 - 0.99).
momentum = 0.95
# Relative jitter for covariance regularization and Cholesky factors.
epsilon_rel = 1e-6

[dispatch]
# Keep candidates with MERE strictly below this threshold...
mere_threshold = 0.2
# ...and speedup strictly above this factor; otherwise fall back to the
# high-precision baseline.
min_speedup = 1.05
# Which sampled statistic the accuracy filter reads: "mean" or "max".
mere_statistic = "mean"

[bench]
# Wall-clock throughput measurement: repetitions after warmup runs.
repetitions = 5
warmup = 2

[mods]
# Reference defaults of the block normalization (used by the mods API, kept
# here so one file records every default).
block_size = 256
eps = 1e-6

# Layers to track and probe. Generators stand in for real training traces:
#   { kind = "normal" }                               iid N(0, 1)
#   { kind = "correlated", rho = 0.6 }                AR(1) feature correlation
#   { kind = "heavy_scale", max_ratio = 100.0, rho = 0.5 }
#                                                     geometric feature-scale
#                                                     ladder, condition number
#                                                     up to max_ratio^2
# Weight generators: { kind = "normal" } or
#   { kind = "heavy_row_scale", max_ratio = 64.0 }    per-output-row ladder

[[layers]]
name = "interaction_fc0"
batch = 256
in_features = 256
out_features = 128
has_bias = false
input_gen = { kind = "normal" }
weight_gen = { kind = "normal" }

[[layers]]
name = "interaction_fc1"
batch = 256
in_features = 128
out_features = 128
has_bias = false
input_gen = { kind = "correlated", rho = 0.6 }
weight_gen = { kind = "normal" }

[[layers]]
name = "overarch_fc0"
batch = 256
in_features = 192
out_features = 64
has_bias = false
input_gen = { kind = "heavy_scale", max_ratio = 100.0, rho = 0.5 }
weight_gen = { kind = "heavy_row_scale", max_ratio = 64.0 }

# Candidate execution schemes. Recipes are "<format>:<granularity>" with
# formats e4m3 | e5m2 and granularities tensorwise | rowwise |
# blockwise:BMxBN. A direction left out runs in high precision.

[[candidates]]
id = "tw_e4m3"
forward = { lhs = "e4m3:tensorwise", rhs = "e4m3:tensorwise" }
backward_input = { lhs = "e5m2:tensorwise", rhs = "e4m3:tensorwise" }
backward_weight = { lhs = "e5m2:tensorwise", rhs = "e4m3:tensorwise" }

[[candidates]]
id = "rw_e4m3"
forward = { lhs = "e4m3:rowwise", rhs = "e4m3:rowwise" }
backward_input = { lhs = "e5m2:rowwise", rhs = "e4m3:rowwise" }
backward_weight = { lhs = "e5m2:rowwise", rhs = "e4m3:rowwise" }

[[candidates]]
id = "bw_e4m3"
forward = { lhs = "e4m3:blockwise:1x128", rhs = "e4m3:blockwise:128x128" }
backward_input = { lhs = "e5m2:blockwise:1x128", rhs = "e4m3:blockwise:128x128" }
backward_weight = { lhs = "e5m2:blockwise:1x128", rhs = "e4m3:blockwise:128x128" }

# Mixed recipe: rowwise forward, high-precision input gradient, tensorwise
# weight gradient.
[[candidates]]
id = "rw_gw_hp"
forward = { lhs = "e4m3:rowwise", rhs = "e4m3:rowwise" }
backward_weight = { lhs = "e5m2:tensorwise", rhs = "e4m3:tensorwise" }
"#;

#[cfg(test)]
mod tests {
    use super::*;
    use quantprobe_core::dispatch::MereStatistic;
    use quantprobe_core::probe::DEFAULT_SAMPLES;

    #[test]
    fn example_config_parses_and_validates() {
        let config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        config.validate().unwrap();
        assert_eq!(config.layers.len(), 3);
        assert_eq!(config.candidates.len(), 4);
        let cands = config.candidates().unwrap();
        assert!(cands.iter().any(|c| c.backward_input.is_none()));
    }

    #[test]
    fn example_config_carries_all_defaults() {
        let config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        assert_eq!(config.samples, DEFAULT_SAMPLES);
        assert_eq!(config.schedule, ProbeSchedule::default());
        assert_eq!(config.track, TrackSection::default());
        assert_eq!(config.tracker, TrackerSection::default());
        assert_eq!(config.dispatch, DispatchConfig::default());
        assert_eq!(config.dispatch.mere_threshold, 0.2);
        assert_eq!(config.dispatch.min_speedup, 1.05);
        assert_eq!(config.dispatch.mere_statistic, MereStatistic::Mean);
        assert_eq!(config.bench, BenchSection::default());
        assert_eq!(config.mods, BlockNormConfig::default());
        assert_eq!(config.mods.block_size, 256);
        assert_eq!(config.tracker.momentum, 0.95);
        assert_eq!(config.tracker.epsilon_rel, 1e-6);
    }

    #[test]
    fn duplicate_layer_names_rejected() {
        let mut config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        let clone = config.layers[0].clone();
        config.layers.push(clone);
        assert!(matches!(config.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn duplicate_candidate_ids_rejected() {
        let mut config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        let clone = config.candidates[0].clone();
        config.candidates.push(clone);
        assert!(matches!(config.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn bad_recipe_string_rejected() {
        let mut config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        config.candidates[0].forward = Some(RecipePairConfig {
            lhs: "e4m3:diagonal".into(),
            rhs: "e4m3:tensorwise".into(),
        });
        assert!(matches!(config.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn reserved_baseline_id_rejected() {
        let mut config: PipelineConfig = toml::from_str(EXAMPLE_CONFIG).unwrap();
        config.candidates[0].id = "baseline".into();
        assert!(config.validate().is_err());
    }
}
