#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

mod bench;
mod commands;
mod config;
mod data;

/// Command-line failures, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] surfpde::Error),
}

impl CliError {
    /// 1 for usage and parse failures, 2 for numerical ones.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(surfpde::Error::Parse { .. } | surfpde::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "surfpde",
    version,
    about = "Discover and solve hidden PDEs on closed surfaces from scattered samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (also `SURFPDE_OUT_DIR`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point cloud on a built-in surface.
    Nodes(commands::NodesArgs),
    /// Learn a sparse PDE model from a dataset.
    Discover(commands::DiscoverArgs),
    /// Forward-solve a learned model and report errors.
    Solve(commands::SolveArgs),
    /// Run a reproduction recipe end to end.
    Bench(bench::BenchArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Nodes(args) => commands::nodes(&args),
        Command::Discover(args) => commands::discover(&args),
        Command::Solve(args) => commands::solve(&args),
        Command::Bench(args) => bench::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
