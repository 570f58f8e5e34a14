mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tlb_core::EngineMode;

#[derive(Debug, Parser)]
#[command(name = "tlb", version, about = "Threshold load balancing with time-varying arrivals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Directory for output files (created if missing)
    #[arg(long, default_value = "tlb-out")]
    out_dir: PathBuf,

    /// Master seed; for multi-seed commands, the first seed of the family
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario file
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Engine override: thinning, coupled or oracle
        #[arg(long)]
        mode: Option<EngineMode>,
        /// Extra settling allowance added to each certified sigma
        #[arg(long, default_value_t = 0.2)]
        slack: f64,
    },
    /// Built-in two-regime experiment over a seed family
    Figure2 {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 300)]
        n: u32,
        /// Number of seeds
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        deltas: Vec<u32>,
        /// thinning uses the oscillating profile, coupled its piecewise-constant variant
        #[arg(long, default_value = "thinning")]
        mode: EngineMode,
        #[arg(long, default_value_t = 0.2)]
        slack: f64,
    },
    /// Fluid solution and interval certificates
    Fluid {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Interval `a,b`; repeatable. Defaults to the scenario's intervals
        #[arg(long = "interval", value_parser = commands::parse_interval)]
        intervals: Vec<[f64; 2]>,
    },
    /// Coupled runs over several system sizes with shared randomness
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<u32>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Level for the error process
        #[arg(long, default_value_t = 2)]
        j: usize,
    },
    /// Scaled deviation of a unit-rate Poisson process from its mean
    Fslln {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Scaling exponent in [0, 1/2); repeatable
        #[arg(long, default_values_t = [0.0, 0.25])]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, common, mode, slack } => {
            commands::run(&scenario, &common.out_dir, common.seed, mode, slack)
        }
        Command::Figure2 { common, n, seeds, deltas, mode, slack } => {
            commands::figure2(&common.out_dir, n, common.seed.unwrap_or(0), seeds, &deltas, mode, slack)
        }
        Command::Fluid { scenario, common, intervals } => commands::fluid(&scenario, &common.out_dir, &intervals),
        Command::Sweep { scenario, common, n_list, seeds, j } => {
            commands::sweep(&scenario, &common.out_dir, common.seed, &n_list, seeds, j)
        }
        Command::Fslln { common, n_list, seeds, gamma, horizon } => {
            commands::fslln(&common.out_dir, common.seed.unwrap_or(0), seeds, &n_list, &gamma, horizon)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
