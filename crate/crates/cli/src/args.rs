use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "covconc",
    version,
    about = "Deviation bounds for Gaussian quadratic forms and covariance Frobenius loss"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace statistics of an operator
    Stats,
    /// Compute deviation bounds
    Bound {
        #[arg(value_enum)]
        kind: BoundKind,
    },
    /// Check bounds and identities by Monte Carlo
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    GaussQf,
    Cov,
    CovWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Moments,
    Tails,
    Cov,
    Mgf,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Moments => "moments",
            Suite::Tails => "tails",
            Suite::Cov => "cov",
            Suite::Mgf => "mgf",
        }
    }
}

/// Options shared by every subcommand. Each can also come from the
/// environment (`COVCONC_<NAME>`) or from a config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Eigenvalue list, or a dense symmetric matrix as CSV
    #[arg(long, global = true)]
    pub spectrum: Option<PathBuf>,

    /// Dense symmetric matrix as CSV
    #[arg(long, global = true)]
    pub matrix: Option<PathBuf>,

    /// Weight map A as CSV (rows x p); enables the weighted covariance bound
    #[arg(long = "weight-matrix", global = true)]
    pub weight_matrix: Option<PathBuf>,

    /// Sample size
    #[arg(long, global = true)]
    pub n: Option<u64>,

    /// Deviation level x in exp(-x)
    #[arg(long, global = true)]
    pub x: Option<f64>,

    /// Excess level y for the inverse quantile
    #[arg(long, global = true)]
    pub y: Option<f64>,

    /// Exponential-moment parameter
    #[arg(long, global = true)]
    pub mu: Option<f64>,

    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte-Carlo replications
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Require a positive semidefinite operator
    #[arg(long, global = true)]
    pub psd: bool,

    /// Write the tail-check table as CSV to this path
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,

    /// key = value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}
