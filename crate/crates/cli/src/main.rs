//! Experiment runner command line.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 on IO
//! errors. Set `GRIDFED_LOG` (an `env_logger` filter, e.g. `info`) to
//! control log verbosity.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridfed_core::config::{parse_config, ScenarioConfig};
use gridfed_core::experiment::{self, ExperimentError, RunSinks};

#[derive(Parser)]
#[command(
    name = "gridfed",
    version,
    about = "Discrete-event simulator of economy-driven job scheduling across federated clusters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write run.csv into the output directory.
    Run {
        /// Scenario configuration file (key = value lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also write protocol.log (one line per protocol message).
        #[arg(long)]
        protocol_trace: bool,
        /// Also write events.log (one line per processed event).
        #[arg(long)]
        event_log: bool,
    },
    /// Run all eleven user-population profiles and write sweep.csv plus
    /// plot-ready .dat series.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicate the roster to system sizes 10, 20, ... and measure message
    /// complexity; writes scale.csv.
    Scale {
        #[arg(long)]
        config: PathBuf,
        /// Largest system size to simulate.
        #[arg(long = "max-n", default_value_t = 50)]
        max_n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a workload trace and print a lint summary.
    Validate {
        /// Trace file in the whitespace-separated archive format.
        trace: PathBuf,
    },
}

fn load_config(path: &Path) -> Result<ScenarioConfig, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

fn exit_code_for(error: &ExperimentError) -> ExitCode {
    match error {
        ExperimentError::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run {
            config,
            out,
            protocol_trace,
            event_log,
        } => {
            let config = load_config(&config)?;
            let report = experiment::run_to_files(
                &config,
                &out,
                RunSinks {
                    event_log,
                    protocol_trace,
                },
            )?;
            println!(
                "{} jobs, {:.2}% accepted, {} protocol messages -> {}",
                report.global.jobs_total,
                report.global.accepted_pct,
                report.global.total_messages,
                out.join("run.csv").display()
            );
        }
        Command::Sweep { config, out } => {
            let config = load_config(&config)?;
            let reports = experiment::sweep(&config, &out)?;
            println!(
                "{} profiles swept -> {}",
                reports.len(),
                out.join("sweep.csv").display()
            );
        }
        Command::Scale { config, max_n, out } => {
            let config = load_config(&config)?;
            let points = experiment::scale(&config, max_n, &out)?;
            for (n, report) in &points {
                println!(
                    "n={n}: {:.3} messages/job, {:.1} messages/agent",
                    report.global.job_msg_avg, report.global.gfa_msg_avg
                );
            }
            println!("-> {}", out.join("scale.csv").display());
        }
        Command::Validate { trace } => {
            let lint = experiment::validate_trace(&trace)?;
            print!("{lint}");
            println!("  warnings:       {}", lint.warnings());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("GRIDFED_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; bad usage is a
            // configuration error.
            let _ = err.print();
            return match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            exit_code_for(&error)
        }
    }
}
