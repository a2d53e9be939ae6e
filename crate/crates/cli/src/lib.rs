//! Command-line pipeline: simulate, causal, classify, marker, cluster,
//! attribute, and `demo`, which chains them on the bundled scenario.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 estimation
//! failure.

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod io;
pub mod manifest;

pub use manifest::RunManifest;

/// Seed used when neither `--seed` nor `VOCSCREEN_SEED` is given.
pub const DEFAULT_SEED: u64 = 20250417;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Estimation(String),
}

impl Failure {
    pub fn io(path: &Path, e: std::io::Error) -> Failure {
        Failure::Usage(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Estimation(_) => 3,
        }
    }
}

impl From<vocscreen::Error> for Failure {
    fn from(e: vocscreen::Error) -> Self {
        use vocscreen::Error as E;
        match e {
            E::Estimation(_) | E::RankDeficient { .. } | E::Degenerate(_) | E::TooFewRows { .. } => {
                Failure::Estimation(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vocscreen", version, about = "Breath-VOC diabetes screening pipeline")]
pub struct Cli {
    /// Master seed; falls back to the scenario seed for `simulate`.
    #[arg(long, global = true, env = "VOCSCREEN_SEED")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a cohort from a structural causal model config.
    Simulate(commands::simulate::Args),
    /// Forward, joint and reverse effect estimates with refutation.
    Causal(commands::causal::Args),
    /// Cross-validated risk classification, ranking and gray zone.
    Classify(commands::classify::Args),
    /// Synthetic glucose marker and group comparisons.
    Marker(commands::marker::Args),
    /// Gaussian-mixture stratification with PCA and validity scores.
    Cluster(commands::cluster::Args),
    /// Shapley attribution for a glucose or risk model.
    Attribute(commands::attribute::Args),
    /// Run the whole pipeline on the bundled scenario.
    Demo(commands::demo::Args),
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    match &cli.command {
        Command::Simulate(a) => commands::simulate::run(a, seed, None).map(|_| ()),
        Command::Causal(a) => commands::causal::run(a, seed.unwrap_or(DEFAULT_SEED), &a.out).map(|_| ()),
        Command::Classify(a) => commands::classify::run(a, seed.unwrap_or(DEFAULT_SEED), &a.out).map(|_| ()),
        Command::Marker(a) => commands::marker::run(a, seed.unwrap_or(DEFAULT_SEED), &a.out).map(|_| ()),
        Command::Cluster(a) => commands::cluster::run(a, seed.unwrap_or(DEFAULT_SEED), &a.out).map(|_| ()),
        Command::Attribute(a) => commands::attribute::run(a, seed.unwrap_or(DEFAULT_SEED), &a.out).map(|_| ()),
        Command::Demo(a) => commands::demo::run(a, seed.unwrap_or(DEFAULT_SEED)).map(|_| ()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
