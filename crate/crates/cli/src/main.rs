//! `ehmac`: batch front end for the energy-harvesting MAC toolkit.

mod commands;
mod output;
mod scenario;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehmac::Method;

use crate::scenario::RegionKind;

#[derive(Debug, Parser)]
#[command(name = "ehmac", version, about = "Energy-harvesting multiple-access channel toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Scenario JSON; the bundled default is used when omitted.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory, or a `.csv` file path. CSV goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for Monte Carlo and simulation; overrides `estimator.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory of arrivals, battery levels and spends.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Throughput of a subset of users.
    Throughput {
        /// 1-based user indices, e.g. `1,3`; all users when omitted.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
        /// Horizon(s); the scenario horizons when omitted.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Rank function of a rate region over every subset.
    Region {
        #[arg(long, value_enum)]
        kind: Option<RegionKind>,
        #[arg(long)]
        n: Option<usize>,
        /// Shift for `--kind shifted`.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        paths: Option<usize>,
    },
    /// Sum-capacity upper and lower bounds across user counts.
    GapSweep {
        #[arg(long, default_value_t = ehmac::regions::SIDE_INFORMATION_GAP_DECIMAL)]
        gamma: f64,
        #[arg(long = "meanE", alias = "mean-e", default_value_t = 1.0)]
        mean_e: f64,
        /// `a:b:geometric`, `a:b:linear`, `a:b:<step>` or a comma list.
        #[arg(long = "K", alias = "users", default_value = "1:1024:geometric")]
        users: String,
    },
    /// Uniform-input AWGN mutual information against its closed-form bounds.
    MiCheck {
        #[arg(long, value_delimiter = ',', default_value = "0.25,1,4,16")]
        powers: Vec<f64>,
        /// Split each total power equally over this many uniform inputs.
        #[arg(long, default_value_t = 1)]
        users: usize,
    },
    /// Exact joint spend entropy rate `H(G^n)/n` in bits.
    Entropy {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Run the acceptance suite and scenario invariants.
    Verify {
        /// Check only the scenario invariants.
        #[arg(long)]
        scenario_only: bool,
    },
}

/// A computed result broke an invariant; exits with status 2.
#[derive(Debug)]
pub struct InvariantFailure(pub String);

impl fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invariant violated: {}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InvariantFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
