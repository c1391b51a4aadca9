//! End-to-end behaviors of the pipeline commands on a small configuration.

use std::path::{Path, PathBuf};
use std::process::Command;

use quantprobe_cli::commands::{cmd_dispatch, cmd_probe, cmd_track, ProbeArgs};
use quantprobe_cli::config::PipelineConfig;
use quantprobe_cli::{tabular, throughput_table};
use quantprobe_core::dispatch::{load_plan, PlanChoice};
use quantprobe_core::gemm::GemmDirection;
use quantprobe_core::metrics::geomean_mere;
use quantprobe_core::probe::{load_report, save_report, InputDistribution, BASELINE_ID};

const SMALL_CONFIG: &str = r#"
seed = 7
samples = 4

[schedule]
activate_every = 100
snapshot_every = 200

[track]
iterations = 400

[dispatch]
mere_threshold = 0.9
min_speedup = 1.05
mere_statistic = "mean"

[[layers]]
name = "fc0"
batch = 16
in_features = 16
out_features = 8
input_gen = { kind = "normal" }
weight_gen = { kind = "normal" }

[[layers]]
name = "fc1"
batch = 16
in_features = 8
out_features = 8
input_gen = { kind = "heavy_scale", max_ratio = 50.0, rho = 0.5 }
weight_gen = { kind = "normal" }

[[candidates]]
id = "tw"
forward = { lhs = "e4m3:tensorwise", rhs = "e4m3:tensorwise" }
backward_input = { lhs = "e5m2:tensorwise", rhs = "e4m3:tensorwise" }
backward_weight = { lhs = "e5m2:tensorwise", rhs = "e4m3:tensorwise" }

[[candidates]]
id = "rw"
forward = { lhs = "e4m3:rowwise", rhs = "e4m3:rowwise" }
backward_input = { lhs = "e5m2:rowwise", rhs = "e4m3:rowwise" }
backward_weight = { lhs = "e5m2:rowwise", rhs = "e4m3:rowwise" }
"#;

fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, SMALL_CONFIG).unwrap();
    path
}

fn small_config() -> PipelineConfig {
    toml::from_str(SMALL_CONFIG).unwrap()
}

/// Full-coverage throughput table: every (layer, direction, candidate) plus
/// baselines, with rw made the fastest everywhere.
fn full_table(dir: &Path, config: &PipelineConfig) -> PathBuf {
    let path = dir.join("rates.csv");
    let mut entries = Vec::new();
    for layer in &config.layers {
        for direction in GemmDirection::ALL {
            entries.push((layer.spec.name.clone(), direction, BASELINE_ID.to_string(), 1e9));
            entries.push((layer.spec.name.clone(), direction, "tw".to_string(), 1.3e9));
            entries.push((layer.spec.name.clone(), direction, "rw".to_string(), 1.5e9));
        }
    }
    throughput_table::write_table(&entries, &path).unwrap();
    path
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quantprobe"))
}

#[test]
fn gen_config_emits_parseable_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("example.toml");
    let status = bin()
        .args(["gen-config", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let config = PipelineConfig::load(&out).unwrap();
    assert_eq!(config.samples, 50);
    assert_eq!(config.dispatch.mere_threshold, 0.2);
    assert_eq!(config.dispatch.min_speedup, 1.05);
    assert_eq!(config.schedule.activate_every, 100);
    assert_eq!(config.schedule.snapshot_every, 10_000);
}

#[test]
fn track_counts_cadence_and_reproduces_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();

    let out1 = dir.path().join("run1");
    let summary1 = cmd_track(&config, &out1, None).unwrap();
    assert_eq!(summary1.activations, 4); // 400 iterations / 100
    assert_eq!(summary1.snapshot_writes, 2); // 400 / 200

    let out2 = dir.path().join("run2");
    let summary2 = cmd_track(&config, &out2, None).unwrap();
    assert_eq!(summary1.activations, summary2.activations);

    for layer in ["fc0", "fc1"] {
        for kind in ["input", "weight"] {
            let f1 = std::fs::read(out1.join(format!("{layer}.{kind}.qpdoc"))).unwrap();
            let f2 = std::fs::read(out2.join(format!("{layer}.{kind}.qpdoc"))).unwrap();
            assert_eq!(f1, f2, "{layer}.{kind} snapshot not reproducible");
        }
    }

    // a different seed changes the data
    let out3 = dir.path().join("run3");
    cmd_track(&config, &out3, Some(8)).unwrap();
    let f1 = std::fs::read(out1.join("fc0.input.qpdoc")).unwrap();
    let f3 = std::fs::read(out3.join("fc0.input.qpdoc")).unwrap();
    assert_ne!(f1, f3);
}

#[test]
fn probe_writes_baselines_and_is_deterministic_with_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();
    let table = full_table(dir.path(), &config);

    let args = ProbeArgs {
        throughput_table: Some(table),
        ..Default::default()
    };
    let report_path1 = dir.path().join("report1.qpdoc");
    let report1 = cmd_probe(&config, &snaps, &report_path1, &args).unwrap();
    let report_path2 = dir.path().join("report2.qpdoc");
    cmd_probe(&config, &snaps, &report_path2, &args).unwrap();

    // every (layer, direction) has a baseline row with speedup exactly 1
    for layer in ["fc0", "fc1"] {
        for direction in GemmDirection::ALL {
            let row = report1
                .results
                .iter()
                .find(|r| {
                    r.layer == layer
                        && r.direction == direction
                        && r.candidate_id == BASELINE_ID
                })
                .unwrap_or_else(|| panic!("missing baseline for {layer}/{direction}"));
            assert_eq!(row.speedup_vs_baseline, 1.0);
            assert!(row.mere < 1e-6);
        }
    }

    // byte-identical files under the injected table
    let b1 = std::fs::read(&report_path1).unwrap();
    let b2 = std::fs::read(&report_path2).unwrap();
    assert_eq!(b1, b2);
}

#[test]
fn probe_compare_distributions_includes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();
    let table = full_table(dir.path(), &config);

    let args = ProbeArgs {
        throughput_table: Some(table),
        compare_distributions: true,
        ..Default::default()
    };
    let report = cmd_probe(&config, &snaps, &dir.path().join("r.qpdoc"), &args).unwrap();
    assert!(!report.comparison.is_empty());
    assert!(!report.comparison_summary.is_empty());
    // both geomeans present and positive
    for s in &report.comparison_summary {
        assert!(s.geomean_learned > 0.0);
        assert!(s.geomean_normal > 0.0);
    }
    // the heavy-scale layer pushes tensorwise learned error above normal
    let fwd_tw = report
        .comparison
        .iter()
        .find(|r| r.layer == "fc1" && r.candidate_id == "tw" && r.direction == GemmDirection::Forward)
        .unwrap();
    assert!(fwd_tw.ratio > 1.0, "ratio {}", fwd_tw.ratio);
}

#[test]
fn dispatch_selects_by_injected_rates_and_plan_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();
    let table = full_table(dir.path(), &config);

    let report_path = dir.path().join("report.qpdoc");
    cmd_probe(
        &config,
        &snaps,
        &report_path,
        &ProbeArgs {
            throughput_table: Some(table.clone()),
            ..Default::default()
        },
    )
    .unwrap();

    let plan_path = dir.path().join("plan.qpdoc");
    let plan = cmd_dispatch(&config, &report_path, None, &plan_path).unwrap();

    // rw is the fastest candidate everywhere; with the permissive 0.9
    // threshold it should win wherever it passes accuracy
    let (report, _) = load_report(&report_path).unwrap();
    for e in &plan.entries {
        if let PlanChoice::Candidate { id, .. } = &e.choice {
            assert_eq!(id, "rw", "{}/{}", e.layer, e.direction);
        }
        // the safety invariant: whatever was chosen passed the filters
        if let PlanChoice::Candidate { id, mere, speedup, .. } = &e.choice {
            let row = report
                .results
                .iter()
                .find(|r| r.layer == e.layer && r.direction == e.direction && &r.candidate_id == id)
                .unwrap();
            assert!(row.mere < 0.9 && row.speedup_vs_baseline > 1.05);
            assert_eq!(*mere, row.mere);
            assert_eq!(*speedup, row.speedup_vs_baseline);
        }
    }

    // reload equals in-memory plan
    let (loaded, _) = load_plan(&plan_path).unwrap();
    assert_eq!(loaded, plan);

    // a table that makes tw the fastest flips the winners deterministically
    let flip = dir.path().join("flip.csv");
    let mut entries = Vec::new();
    for layer in &config.layers {
        for direction in GemmDirection::ALL {
            entries.push((layer.spec.name.clone(), direction, BASELINE_ID.to_string(), 1e9));
            entries.push((layer.spec.name.clone(), direction, "tw".to_string(), 2.0e9));
            entries.push((layer.spec.name.clone(), direction, "rw".to_string(), 1.5e9));
        }
    }
    throughput_table::write_table(&entries, &flip).unwrap();
    let plan2 = cmd_dispatch(&config, &report_path, Some(&flip), &plan_path).unwrap();
    for e in &plan2.entries {
        if let PlanChoice::Candidate { id, .. } = &e.choice {
            assert_eq!(id, "tw", "{}/{}", e.layer, e.direction);
        }
    }
}

#[test]
fn dispatch_all_filtered_gives_all_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();

    // rates below the 1.05 speedup gate for every candidate
    let path = dir.path().join("slow.csv");
    let mut entries = Vec::new();
    for layer in &config.layers {
        for direction in GemmDirection::ALL {
            entries.push((layer.spec.name.clone(), direction, BASELINE_ID.to_string(), 1e9));
            entries.push((layer.spec.name.clone(), direction, "tw".to_string(), 1.02e9));
            entries.push((layer.spec.name.clone(), direction, "rw".to_string(), 0.9e9));
        }
    }
    throughput_table::write_table(&entries, &path).unwrap();

    let report_path = dir.path().join("report.qpdoc");
    cmd_probe(
        &config,
        &snaps,
        &report_path,
        &ProbeArgs {
            throughput_table: Some(path),
            ..Default::default()
        },
    )
    .unwrap();
    let plan = cmd_dispatch(&config, &report_path, None, &dir.path().join("plan.qpdoc")).unwrap();
    assert_eq!(plan.entries.len(), 6);
    assert!(plan
        .entries
        .iter()
        .all(|e| e.choice == PlanChoice::Baseline));
}

#[test]
fn report_rendering_and_csv_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();
    let table = full_table(dir.path(), &config);

    let report_path = dir.path().join("report.qpdoc");
    let report = cmd_probe(
        &config,
        &snaps,
        &report_path,
        &ProbeArgs {
            throughput_table: Some(table),
            ..Default::default()
        },
    )
    .unwrap();

    // rendered geomean rows equal a direct recomputation from the rows
    let rendered = tabular::render_report(&report);
    for (id, dir_name, g) in tabular::candidate_geomeans(&report) {
        let meres: Vec<f64> = report
            .results
            .iter()
            .filter(|r| r.candidate_id == id && r.direction.to_string() == dir_name)
            .map(|r| r.mere)
            .collect();
        let expect = geomean_mere(&meres).unwrap();
        assert_eq!(g, expect);
        assert!(rendered.contains(&id));
    }

    // CSV export is re-readable and matches
    let csv_path = dir.path().join("report.csv");
    let output = bin()
        .args(["report", "--input"])
        .arg(&report_path)
        .args(["--out"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let rows = tabular::read_report_csv(&csv_path).unwrap();
    assert_eq!(rows.len(), report.results.len());
    for (row, r) in rows.iter().zip(&report.results) {
        assert_eq!(row.layer, r.layer);
        assert_eq!(row.candidate_id, r.candidate_id);
        assert_eq!(row.mere_mean, r.mere);
    }

    // plan rendering + CSV
    let plan_path = dir.path().join("plan.qpdoc");
    cmd_dispatch(&config, &report_path, None, &plan_path).unwrap();
    let plan_csv = dir.path().join("plan.csv");
    let output = bin()
        .args(["report", "--input"])
        .arg(&plan_path)
        .args(["--out"])
        .arg(&plan_csv)
        .output()
        .unwrap();
    assert!(output.status.success());
    let rows = tabular::read_plan_csv(&plan_csv).unwrap();
    assert_eq!(rows.len(), 6);
}

#[test]
fn empty_report_renders_no_results_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.qpdoc");
    let report = quantprobe_core::probe::ProbeReport {
        config: quantprobe_core::probe::ReportConfig {
            seed: 0,
            samples: 1,
            distribution: InputDistribution::Learned,
            throughput_source: "skip".into(),
            dispatch: Default::default(),
        },
        results: Vec::new(),
        aggregates: Vec::new(),
        comparison: Vec::new(),
        comparison_summary: Vec::new(),
    };
    save_report(&report, &path).unwrap();

    let output = bin().args(["report", "--input"]).arg(&path).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("no results"));
}

#[test]
fn malformed_file_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.qpdoc");
    std::fs::write(&path, b"not a container at all").unwrap();
    let output = bin().args(["report", "--input"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"));
}

#[test]
fn missing_config_exits_with_usage_error() {
    let output = bin()
        .args(["track", "--config", "/nonexistent.toml", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn version_mismatch_surfaces_from_probe() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config();
    let snaps = dir.path().join("snaps");
    cmd_track(&config, &snaps, None).unwrap();

    // corrupt one snapshot's version field
    let victim = snaps.join("fc0.input.qpdoc");
    let mut bytes = std::fs::read(&victim).unwrap();
    bytes[6] = 9;
    std::fs::write(&victim, &bytes).unwrap();

    let err = cmd_probe(
        &config,
        &snaps,
        &dir.path().join("r.qpdoc"),
        &ProbeArgs::default(),
    )
    .unwrap_err();
    assert!(err.message().contains("version"), "{err}");
    assert_eq!(err.exit_code(), 2);
}
