use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use quantprobe_cli::commands::{cmd_dispatch, cmd_probe, cmd_report, cmd_track, ProbeArgs};
use quantprobe_cli::config::{PipelineConfig, EXAMPLE_CONFIG};
use quantprobe_cli::CliError;
use quantprobe_core::probe::InputDistribution;

/// Per-layer FP8 GEMM safety probing and recipe dispatch.
#[derive(Parser)]
#[command(name = "quantprobe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an example configuration with every default spelled out.
    GenConfig(GenConfigCmd),
    /// Run the synthetic training loop and persist tracker snapshots.
    Track(TrackCmd),
    /// Probe layers against candidate recipes and write a report.
    Probe(ProbeCmd),
    /// Build a dispatch plan from a report.
    Dispatch(DispatchCmd),
    /// Render a report or plan; optionally export CSV.
    Report(ReportCmd),
}

#[derive(Args)]
struct GenConfigCmd {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrackCmd {
    #[arg(long)]
    config: PathBuf,
    /// Directory for snapshots and the run summary.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ProbeCmd {
    #[arg(long)]
    config: PathBuf,
    /// Directory holding tracker snapshots.
    #[arg(long)]
    snapshots: PathBuf,
    /// Report output path.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config sample count.
    #[arg(long)]
    samples: Option<u32>,
    /// Input sampling distribution.
    #[arg(long, value_parser = parse_distribution)]
    distribution: Option<InputDistribution>,
    /// CSV of externally measured rates; replaces host measurement.
    #[arg(long)]
    throughput_table: Option<PathBuf>,
    /// Also probe with standard-normal inputs and report paired MEREs.
    #[arg(long)]
    compare_distributions: bool,
}

#[derive(Args)]
struct DispatchCmd {
    #[arg(long)]
    config: PathBuf,
    /// Probe report to select from.
    #[arg(long)]
    report: PathBuf,
    /// Plan output path.
    #[arg(long)]
    out: PathBuf,
    /// CSV of externally measured rates; overrides the report's throughput.
    #[arg(long)]
    throughput_table: Option<PathBuf>,
}

#[derive(Args)]
struct ReportCmd {
    /// Report or plan file.
    #[arg(long)]
    input: PathBuf,
    /// CSV export path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_distribution(s: &str) -> Result<InputDistribution, String> {
    match s {
        "learned" => Ok(InputDistribution::Learned),
        "normal" => Ok(InputDistribution::StandardNormal),
        other => Err(format!("unknown distribution {other:?} (learned | normal)")),
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap already renders help/version to stdout; map real usage errors
        if e.use_stderr() {
            CliError::Usage(e.to_string())
        } else {
            e.exit()
        }
    })?;

    match cli.command {
        Command::GenConfig(cmd) => {
            match cmd.out {
                Some(path) => std::fs::write(&path, EXAMPLE_CONFIG)
                    .map_err(|e| CliError::Data(format!("write {}: {e}", path.display())))?,
                None => print!("{EXAMPLE_CONFIG}"),
            }
            Ok(())
        }
        Command::Track(cmd) => {
            let config = PipelineConfig::load(&cmd.config)?;
            let summary = cmd_track(&config, &cmd.out, cmd.seed)?;
            println!(
                "tracked {} layers for {} iterations: {} activations, {} snapshot writes -> {}",
                summary.layers.len(),
                summary.iterations,
                summary.activations,
                summary.snapshot_writes,
                cmd.out.display()
            );
            Ok(())
        }
        Command::Probe(cmd) => {
            let config = PipelineConfig::load(&cmd.config)?;
            let args = ProbeArgs {
                seed: cmd.seed,
                samples: cmd.samples,
                distribution: cmd.distribution,
                throughput_table: cmd.throughput_table,
                compare_distributions: cmd.compare_distributions,
            };
            let report = cmd_probe(&config, &cmd.snapshots, &cmd.out, &args)?;
            println!(
                "probed {} layers x {} candidates -> {} rows in {}",
                config.layers.len(),
                config.candidates.len(),
                report.results.len(),
                cmd.out.display()
            );
            Ok(())
        }
        Command::Dispatch(cmd) => {
            let config = PipelineConfig::load(&cmd.config)?;
            let plan = cmd_dispatch(
                &config,
                &cmd.report,
                cmd.throughput_table.as_deref(),
                &cmd.out,
            )?;
            let chosen = plan
                .entries
                .iter()
                .filter(|e| !matches!(e.choice, quantprobe_core::dispatch::PlanChoice::Baseline))
                .count();
            println!(
                "planned {} entries ({} low-precision, {} baseline) -> {}",
                plan.entries.len(),
                chosen,
                plan.entries.len() - chosen,
                cmd.out.display()
            );
            Ok(())
        }
        Command::Report(cmd) => {
            let text = cmd_report(&cmd.input, cmd.out.as_deref())?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
