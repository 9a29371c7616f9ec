//! `evodich`: stability and exponential-dichotomy analysis of `y' = A(t) y`
//! through discretized evolution semigroups.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Decide uniform stability and exponential dichotomy of linear systems
/// y' = A(t) y from the spectrum of their evolution semigroup.
///
/// Systems are read from JSON documents with fields "dimension", "kind"
/// (constant | periodic | sampled), and "matrix", "period", "samples" or
/// "fourier" as the kind requires. Complex entries are [re, im] pairs.
///
/// Exit status: 0 on success, 1 on any error or failed verification, 2 when
/// `analyze` finds the spectrum on (or within 1e-6 of) the unit circle.
///
/// EVODICH_THREADS caps the worker threads (0 or unset: one per core).
#[derive(Debug, Parser)]
#[command(name = "evodich", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spectrum of the cyclic semigroup, dichotomy projections and verdict for one system.
    ///
    /// Writes spectrum.json (or eigenvalues.csv), dichotomy.json and
    /// projections.csv to the output directory.
    Analyze(RunArgs),
    /// Equivalence checks for one system, or for the whole gallery without --input.
    ///
    /// Writes tables.json (or summary.csv). Exits 0 iff every table with
    /// well-separated margins is consistent.
    Verify(RunArgs),
    /// Runs the built-in gallery with its oracle cross-checks.
    ///
    /// Writes gallery.json (or summary.csv).
    Gallery(RunArgs),
    /// Eigenvalues of the cyclic semigroup operator for plotting against the unit circle.
    ///
    /// Writes eigenvalues.csv with "re,im" rows and spectrum_meta.json.
    Spectrum(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// System specification (JSON).
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "evodich-out")]
    out: PathBuf,
    /// Grid cells per period (or per window for sampled systems).
    #[arg(short = 'N', long = "cells", value_name = "N", default_value_t = 16)]
    n: usize,
    /// Grid step; must divide the period. Overrides -N.
    #[arg(long, value_name = "H")]
    step: Option<f64>,
    /// Exponent of the L_p norms used by witness diagnostics.
    #[arg(short = 'p', value_name = "P", default_value_t = 2.0)]
    p: f64,
    /// Integration tolerance.
    #[arg(long, value_name = "TOL", default_value_t = 1e-10)]
    tol: f64,
    /// Seed for randomized diagnostics.
    #[arg(long, default_value_t = evodich::suite::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("EVODICH_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("EVODICH_THREADS must be a non-negative integer, got {raw:?}"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Analyze(args) => commands::analyze(args),
        Command::Verify(args) => commands::verify(args),
        Command::Gallery(args) => commands::gallery(args),
        Command::Spectrum(args) => commands::spectrum(args),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
