mod commands;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Separable effects of treatment components on a survival outcome:
/// simulate trials, check identification, estimate by inverse probability
/// weighting and check estimators against exact g-formula values.
#[derive(Debug, Parser)]
#[command(name = "separable", version)]
pub struct Cli {
    /// Configuration file for the command (scenario TOML for simulate,
    /// oracle-check and reproduce; estimation TOML for estimate).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file and the run manifest.
    #[arg(long, global = true, env = "SEPARABLE_OUT_DIR", default_value = "separable-out")]
    pub out_dir: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a two-arm trial and write the person-period panel.
    Simulate {
        /// Panel file name inside the output directory.
        #[arg(long, default_value = "panel.csv")]
        out: String,
    },
    /// Check graphical identification conditions on a DAG file.
    Identify {
        graph: PathBuf,
        /// Last interval checked (default: the largest in the graph).
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Estimate the risk under a separable intervention from a panel CSV.
    Estimate { panel: PathBuf },
    /// Compare both weighted representations with the g-formula by enumeration.
    OracleCheck {
        /// Horizon to enumerate (default: the scenario's).
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Rerun the three-model simulation study and write CSV bundles.
    Reproduce {
        /// Fraction of 500,000 individuals per arm.
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        /// Also draw each bundle as an SVG line plot.
        #[arg(long)]
        svg: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
