//! Experiment front door: config-driven sweeps and plot-ready exports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 one or more runs
//! failed.

use std::path::PathBuf;
use std::process::ExitCode;

use acl_core::config::parse_config;
use acl_core::engine::FR_MILESTONES;
use acl_core::experiment::{run_ceiling, run_experiment, CeilingKind};
use acl_core::report::{
    emit_jaccard, emit_nfr, emit_profile, emit_relative, read_runs, write_summary_csv,
};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "acl", about = "Active continual learning laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CeilingArg {
    Indiv,
    Mtl,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Maximum number of concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize persisted runs into a CSV table.
    Metrics {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forgetting-learning profile points per run and per method.
    Profile {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy deltas of ACL runs against their supervised baselines.
    Relative {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalized forgetting ratios at budget checkpoints.
    Nfr {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Budget checkpoints in percent, comma separated.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u8>>,
    },
    /// Query overlap between sequential and independent labelling.
    Jaccard {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the Indiv or MTL ceiling for a config.
    Ceiling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: CeilingArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> acl_core::Result<ExitCode> {
    match cli.command {
        Command::Run { config, jobs, out } => {
            let config = parse_config(&config)?;
            let report = run_experiment(&config, jobs, out.as_deref())?;
            println!(
                "{} run(s) written to {}",
                report.records.len(),
                report.output_dir.display()
            );
            if !report.failures.is_empty() {
                for f in &report.failures {
                    eprintln!("run failed: {}: {}", f.context, f.error);
                }
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Metrics { runs, out } => {
            let runs = read_runs(&runs)?;
            write_summary_csv(&runs, &out)?;
            println!(
                "summary for {} run(s) written to {}",
                runs.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Profile { runs, out } => {
            let runs = read_runs(&runs)?;
            emit_profile(&runs, &out)?;
            println!("profile written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Relative {
            runs,
            baseline,
            out,
        } => {
            let runs = read_runs(&runs)?;
            let baseline = read_runs(&baseline)?;
            emit_relative(&runs, &baseline, &out)?;
            println!("relative performance written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Nfr {
            runs,
            baseline,
            out,
            budgets,
        } => {
            let runs = read_runs(&runs)?;
            let baseline = read_runs(&baseline)?;
            let budgets = budgets.unwrap_or_else(|| FR_MILESTONES.to_vec());
            emit_nfr(&runs, &baseline, &budgets, &out)?;
            println!("normalized forgetting ratios written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Jaccard { runs, out } => {
            let runs = read_runs(&runs)?;
            emit_jaccard(&runs, &out)?;
            println!("jaccard overlaps written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ceiling { config, kind, out } => {
            let config = parse_config(&config)?;
            let kind = match kind {
                CeilingArg::Indiv => CeilingKind::Indiv,
                CeilingArg::Mtl => CeilingKind::Mtl,
            };
            run_ceiling(&config, kind, &out)?;
            println!("ceiling accuracies written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
