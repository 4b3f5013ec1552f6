//! `energy-exchange`: batch front end for kernel checks, static reports,
//! variational bounds, simulations and combined reports.
//!
//! Exit codes: 0 success, 1 condition or verdict failure, 2 usage error,
//! 3 numerical failure, 4 missing upstream result.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "energy-exchange", version, about = "Stochastic energy-exchange chains: static constants, variational bounds and Green-Kubo simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Shared {
    /// Built-in kernel: gg2, gg3, root-eta, uniform (or the broken-alpha fixture).
    #[arg(long, global = true)]
    pub kernel: Option<String>,
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Format of the summary written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check homogeneity, symmetry and detailed balance of a kernel.
    KernelCheck,
    /// Static constants, condition (3=4) and the gradient diagnosis.
    Static,
    /// Variational upper bound on the conductivity at unit temperature.
    Variational {
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long)]
        n_samples: Option<usize>,
        /// Leave out the half-power feature.
        #[arg(long)]
        no_half_power: bool,
    },
    /// Green-Kubo simulation of the chain.
    Simulate {
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        n_sites: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        /// Write every exchange of replica 0 to this binary file.
        #[arg(long)]
        event_log: Option<PathBuf>,
    },
    /// Merge static, variational and simulation results into one verdict.
    Report,
    /// Print the resolved configuration as TOML.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
