//! `treejac`: batch front end for the spectral toolkit.
//!
//! Exit status 0 on success, 1 when input or a requested check fails, 2 when
//! a computation does not converge.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "treejac", version, about = "Spectral theory of periodic Jacobi matrices on trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a graph file and print its structure.
    Validate(Common),
    /// Density of states on a grid (CSV) plus the spectral report (JSON).
    Dos(Common),
    /// Walk moments against the moments of the spectral report.
    Moments(Common),
    /// Eigenvalues of a finite truncation of the cover.
    Truncate(Common),
    /// Closed-form models against the solver.
    OracleCheck(Common),
    /// Eigenvalue multiplicity from the pole structure at --lambda.
    Aomoto(Common),
    /// Resolvent consistency defects at random points of the upper half-plane.
    Consistency(Common),
    /// Checks that every spectral gap carries an IDS value j/p.
    GapLabel(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Free,
    Canonical,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Graph description (JSON).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for output artifacts; stdout only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Height above the real axis for grid densities.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Radius of the truncation, in blocks.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance of the requested check.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Largest matrix dimension for dense eigensolves.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long = "max-k")]
    pub max_k: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Dos(c) => commands::dos(c),
        Command::Moments(c) => commands::moments(c),
        Command::Truncate(c) => commands::truncate(c),
        Command::OracleCheck(c) => commands::oracle_check(c),
        Command::Aomoto(c) => commands::aomoto(c),
        Command::Consistency(c) => commands::consistency(c),
        Command::GapLabel(c) => commands::gap_label(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treejac: {e}");
            ExitCode::from(e.code())
        }
    }
}
