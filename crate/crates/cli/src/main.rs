//! `himm`: seeded generation, EM fitting, sensing and the detection,
//! tracking and mutual-information experiments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FitMode;
use himm::HimmError;

const AFTER_HELP: &str = "\
Output tables are comma-delimited with a header row, LF line endings and 12
significant digits:
  trajectory.csv   t,E,C,U,Y            (levels as level values, C: 0 idle, 1 busy)
  params.json      fitted or generating parameter set
  loglik.csv       iteration,loglik     (iteration 0 = initial parameters)
  starts.csv       start,seed,final_loglik,iterations,converged
  decisions.csv    t,c_hat,e_hat,busy_posterior,log_evidence_increment,busy_at_tau
  benchmark.csv    snr_db,pfa_target,pd_2d,pd_1d,pd_memoryless (empty = target outside the curve)
  tracking.csv     t,E_true,e_hat
  confusion.csv    true level, then one count column per estimated level
  mi.csv           horizon,trials,mi_nats,standard_error

Exit status: 0 success, 1 I/O error, 2 configuration error,
3 model/data mismatch, 4 numerical degeneracy.";

#[derive(Parser)]
#[command(name = "himm", version, about = "Joint spectrum/power sensing with a hidden input Markov model", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML); built-in demo settings when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SenseMode {
    #[value(name = "2d")]
    TwoD,
    #[value(name = "1d")]
    OneD,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a hidden trajectory and observations.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Parameter file; the physical model of the config is used when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Number of slots (default: t_train).
        #[arg(long)]
        len: Option<usize>,
    },
    /// Learn parameters from an observation table with multi-start EM.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Observation table with U and Y columns.
        #[arg(long)]
        obs: PathBuf,
        /// Start EM from this parameter file instead of random starts.
        #[arg(long)]
        init: Option<PathBuf>,
        /// M-step weighting, overrides the config.
        #[arg(long, value_enum)]
        mode: Option<FitMode>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the 2-D or 1-D sensor over an observation table.
    Sense {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, value_enum, default_value = "2d")]
        mode: SenseMode,
        /// Busy-posterior threshold (default: config tau).
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Detection probability at matched false alarm over the SNR grid.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Fit parameters on training data before each point.
        #[arg(long)]
        learn: bool,
    },
    /// Energy-state tracking on a fresh trajectory.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Number of slots (default: t_test).
        #[arg(long)]
        len: Option<usize>,
    },
    /// Monte-Carlo mutual-information gain of the harvested-energy stream.
    Mi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the default run configuration.
    DefaultConfig,
}

fn exit_code(err: &HimmError) -> u8 {
    match err {
        e if e.is_numerical() => 4,
        HimmError::Config(_) => 2,
        HimmError::Io(_) => 1,
        HimmError::AllStartsFailed(_, inner) => exit_code(inner),
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
