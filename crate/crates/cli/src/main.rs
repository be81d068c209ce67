//! `cuesim` command-line front end.
//!
//! Exit status: 0 on success, 1 on a runtime failure (including safety
//! invariant violations), 2 when the configuration is invalid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cuesim::config::RunConfig;
use cuesim::run::{export_track, run_scenario, write_comparison};
use cuesim::Result;

#[derive(Parser)]
#[command(name = "cuesim", version, about = "Motion-cueing and frame-pipeline simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write telemetry.csv and metrics.json.
    Run(RunArgs),
    /// Run the scenario under both pipelines and write comparison.json.
    ComparePipelines(RunArgs),
    /// Track utilities.
    Track {
        #[command(subcommand)]
        command: TrackCommand,
    },
    /// Check a configuration file without running anything.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TrackCommand {
    /// Write track.json with the segment list and a 1 m centreline.
    Export {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.duration_s`, seconds.
    #[arg(long)]
    duration: Option<f64>,
}

fn load(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = load(self.config.as_ref())?;
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(d) = self.duration {
            cfg.run.duration_s = d;
        }
        if let Some(out) = &self.out {
            cfg.run.output_dir = out.clone();
        }
        cfg.validate()?;
        let out = cfg.run.output_dir.clone();
        Ok((cfg, out))
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = args.resolve()?;
            let (m, files) = run_scenario(&cfg, &out)?;
            println!("telemetry  {} ({} rows)", files.telemetry.display(), m.telemetry_rows);
            println!("metrics    {}", files.metrics.display());
            if let Some(l) = &m.latency {
                println!(
                    "latency    mean {:.3} ms, max {:.3} ms",
                    l.mean_input_latency_ms, l.max_input_latency_ms
                );
                println!("mismatch   {:.1}% of frames", 100.0 * l.mismatch_nonzero_fraction);
            }
            println!(
                "laps {}  crashes {}  sha256 {}",
                m.laps_completed, m.crash_events, m.telemetry_sha256
            );
        }
        Command::ComparePipelines(args) => {
            let (cfg, out) = args.resolve()?;
            let (cmp, path) = write_comparison(&cfg, &out)?;
            for (name, s) in [
                ("default_fixed_step", &cmp.default_fixed_step),
                ("physics_on_update", &cmp.physics_on_update),
            ] {
                if let Some(l) = &s.latency {
                    println!(
                        "{name:<19} latency {:.3} ms  mismatch mean {:.3} ms, nonzero {:.1}%",
                        l.mean_input_latency_ms,
                        l.mean_mismatch_ms,
                        100.0 * l.mismatch_nonzero_fraction
                    );
                }
            }
            println!("comparison {}", path.display());
        }
        Command::Track {
            command: TrackCommand::Export { config, out },
        } => {
            let cfg = load(config.as_ref())?;
            let out = out.unwrap_or_else(|| cfg.run.output_dir.clone());
            let (export, path) = export_track(&cfg, &out)?;
            println!(
                "track      {} ({} segments, {:.1} m lap)",
                path.display(),
                export.segments.len(),
                export.lap_length_m
            );
        }
        Command::Validate { config } => {
            load(config.as_ref())?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
