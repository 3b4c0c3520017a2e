//! `mspc`: generate data, monitor streams, run ARL studies and plot charts.

mod commands;
mod config;
mod error;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manifold_spc::pipelines::Procedure;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mspc", version, about = "Manifold-based statistical process control")]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "MSPC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Mf,
    Pca,
    Lpp,
    Npe,
}

impl From<MethodArg> for Procedure {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mf => Procedure::Mf,
            MethodArg::Pca => Procedure::Pca,
            MethodArg::Lpp => Procedure::Lpp,
            MethodArg::Npe => Procedure::Npe,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the sphere process (optionally with a mean shift) to CSV.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit on Phase I and monitor Phase II; writes a trace CSV and summary JSON.
    Monitor {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        phase1: PathBuf,
        #[arg(long)]
        phase2: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Overrides the chart seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo ARL/SDRL table over shift scenarios and methods.
    Arl {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Restrict the study to one method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        replications: Option<usize>,
        /// Base seed; replication i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a trace CSV as an SVG control chart.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Generate { config, out, seed } => {
            let cfg = RunConfig::load(&config)?;
            commands::generate(&cfg, &out, seed)?;
            println!("wrote {}", out.display());
        }
        Command::Monitor {
            config,
            phase1,
            phase2,
            out,
            method,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let run = commands::monitor(
                &cfg,
                commands::MonitorArgs {
                    phase1: &phase1,
                    phase2: &phase2,
                    out: &out,
                    method: method.map(Into::into),
                    seed,
                },
            )?;
            if run.censored {
                println!("no alarm in {} steps", run.run_length);
            } else {
                println!("alarm at step {}", run.run_length);
            }
        }
        Command::Arl {
            config,
            out,
            method,
            replications,
            seed,
        } => {
            let cfg = RunConfig::load(&config)?;
            let cells = commands::arl(
                &cfg,
                commands::ArlArgs {
                    out: &out,
                    method: method.map(Into::into),
                    seed,
                    replications,
                },
            )?;
            for c in &cells {
                println!(
                    "{:>4} coord={} delta={}: ARL {:.2} SDRL {:.2}",
                    c.procedure.to_string(),
                    c.scenario.coordinate,
                    c.scenario.delta,
                    c.summary.arl,
                    c.summary.sdrl
                );
            }
        }
        Command::Plot { trace, out } => {
            let alarms = commands::plot(&trace, &out)?;
            println!("wrote {} ({alarms} alarms)", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
