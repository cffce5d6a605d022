use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ext_solver::config::parse_config;
use ext_solver::run::{check_kernels, run, Outcome, StudyKind};

/// Solvers and studies for exterior extension problems of second-order
///elliptic operators.
#[derive(Parser)]
#[command(name = "ext-solver", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.csv and field.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem once.
    Solve(RunArgs),
    /// Sweep source or node counts and report errors per level.
    StudyConvergence(RunArgs),
    /// Sweep noise levels on the boundary data.
    StudyNoise(RunArgs),
    /// Sweep the source-shell radius and report conditioning.
    StudyConditioning(RunArgs),
    /// Run the kernel invariant suite; config optional.
    CheckKernels {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run_command(args: &RunArgs, study: StudyKind) -> ExitCode {
    let cfg = match parse_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    match run(&cfg, study, &out_dir) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Flagged) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Solve(args) => run_command(args, StudyKind::Solve),
        Command::StudyConvergence(args) => run_command(args, StudyKind::Convergence),
        Command::StudyNoise(args) => run_command(args, StudyKind::Noise),
        Command::StudyConditioning(args) => run_command(args, StudyKind::Conditioning),
        Command::CheckKernels { config } => {
            let cfg = match config {
                Some(path) => match parse_config(path) {
                    Ok(cfg) => Some(cfg),
                    Err(e) => {
                        eprintln!("config error: {e}");
                        return ExitCode::from(2);
                    }
                },
                None => None,
            };
            match check_kernels(cfg.as_ref()) {
                Outcome::Clean => ExitCode::SUCCESS,
                Outcome::Flagged => ExitCode::from(1),
            }
        }
    }
}
