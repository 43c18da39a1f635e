//! Command-line driver: simulate benchmark data, fit and certify tubes, and
//! emit the tables behind the coverage, distribution-shift and ρ-sweep
//! figures.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 I/O, 4 solver or
//! numerical failure.

pub mod commands;
pub mod error;
pub mod io;
pub mod results;
pub mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use reachtube::SizeProxy;

pub use error::{CliError, Result};
use settings::{Common, Options};

#[derive(Debug, Parser)]
#[command(name = "reachtube", version, about = "Data-driven reachable tubes with a-posteriori certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate benchmark trajectories to CSV.
    Simulate(SimulateArgs),
    /// Fit a tube to a trajectory CSV and write a results document.
    Fit(FitArgs),
    /// Add complexity and violation levels to a results document.
    Certify(CertifyArgs),
    /// Repeated fit/certify/test runs: certified level against empirical exclusion.
    Validate(ExperimentArgs),
    /// One fit per ρ on shared data: size, complexity and empirical exclusion.
    Sweep(ExperimentArgs),
    /// Violation levels over a grid of N, ν and β.
    Epsilon(EpsilonArgs),
    /// Fit on nominal data, test on shifted data against the shift bound.
    Ood(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of trajectories.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training trajectories (CSV).
    #[arg(long)]
    pub trajectories: PathBuf,
    #[arg(long)]
    pub proxy: Option<SizeProxy>,
    /// Generator count for default zonotope generators.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Keep the first optimal solution instead of the minimum-norm one.
    #[arg(long)]
    pub no_tie_break: bool,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Results document written by `fit`; updated in place without --out.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub tol_active: Option<f64>,
    /// Wasserstein radius of the test distribution around the training one.
    #[arg(long)]
    pub mu_tilde: Option<f64>,
    /// Perturbation radius R; defaults to the fit's perturbation radius.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Test trajectories (CSV) for an empirical check of the certificate.
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Repeats of `validate`.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Experiments of `ood`.
    #[arg(long)]
    pub experiments: Option<usize>,
    #[arg(long)]
    pub tol_active: Option<f64>,
    #[arg(long)]
    pub mu_tilde: Option<f64>,
    #[arg(long)]
    pub proxy: Option<SizeProxy>,
}

#[derive(Debug, Args)]
pub struct EpsilonArgs {
    #[command(flatten)]
    pub common: Common,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Complexities, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub nu: Option<Vec<usize>>,
}

impl ExperimentArgs {
    fn options(&self) -> Options {
        Options {
            n_train: self.n_train,
            n_test: self.n_test,
            horizon: self.horizon,
            repeats: self.repeats,
            experiments: self.experiments,
            tol_active: self.tol_active,
            mu_tilde: self.mu_tilde,
            proxy: self.proxy,
            ..Options::from_common(&self.common)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => {
            let flags = Options {
                n: a.n.map(|n| vec![n]),
                horizon: a.horizon,
                ..Options::from_common(&a.common)
            };
            let opts = Options::resolve(flags, &a.common)?;
            commands::simulate(&opts, a.common.out.as_deref())
        }
        Command::Fit(a) => {
            let flags = Options {
                proxy: a.proxy,
                order: a.order,
                tol: a.tol,
                tie_break: a.no_tie_break.then_some(false),
                ..Options::from_common(&a.common)
            };
            let opts = Options::resolve(flags, &a.common)?;
            commands::fit_cmd(&opts, &a.trajectories, a.common.out.as_deref())
        }
        Command::Certify(a) => {
            let flags = Options {
                tol_active: a.tol_active,
                mu_tilde: a.mu_tilde,
                radius: a.radius,
                ..Options::from_common(&a.common)
            };
            let opts = Options::resolve(flags, &a.common)?;
            commands::certify(&opts, &a.results, a.test.as_deref(), a.common.out.as_deref())
        }
        Command::Validate(a) => {
            let opts = Options::resolve(a.options(), &a.common)?;
            commands::validate(&opts, a.common.out.as_deref())
        }
        Command::Sweep(a) => {
            let opts = Options::resolve(a.options(), &a.common)?;
            commands::sweep(&opts, a.common.out.as_deref())
        }
        Command::Ood(a) => {
            let opts = Options::resolve(a.options(), &a.common)?;
            commands::ood(&opts, a.common.out.as_deref())
        }
        Command::Epsilon(a) => {
            let flags = Options {
                n: a.n.clone(),
                nu: a.nu.clone(),
                ..Options::from_common(&a.common)
            };
            let opts = Options::resolve(flags, &a.common)?;
            commands::epsilon(&opts, a.common.out.as_deref())
        }
    }
}
