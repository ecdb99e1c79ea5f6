//! `hdcm`: estimate hybrid choice models and post-process their posteriors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

pub const VERSION: &str = env!("HDCM_VERSION");

#[derive(Debug, Parser)]
#[command(name = "hdcm", version = VERSION, about = "Hierarchical-Bayes hybrid discrete choice models")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sampler and write per-chain posterior directories and summaries.
    Estimate {
        spec: PathBuf,
        data_dir: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides `sampler.n_chains` of the spec.
        #[arg(long)]
        chains: Option<usize>,
        /// Overrides `sampler.seed` of the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic dataset from known parameters.
    Simulate {
        spec: PathBuf,
        truth: PathBuf,
        #[arg(short = 'n', long = "individuals")]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Market shares under the baseline and what-if scenarios.
    Predict {
        spec: PathBuf,
        data_dir: PathBuf,
        /// Chain directories, or an estimate output directory holding them.
        #[arg(required = true)]
        posterior: Vec<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Share table path; standard output when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Seed for latent draws simulated when individual draws were not stored.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Individual marginal willingness to pay and its heterogeneity regression.
    Mwtp {
        spec: PathBuf,
        #[arg(required = true)]
        posterior: Vec<PathBuf>,
        /// Coefficient name, e.g. `time` or `search_time@car_off`.
        #[arg(long)]
        attribute: String,
        /// CSV with `individual_id` and one numeric column per characteristic.
        #[arg(long)]
        regress: Option<PathBuf>,
        /// Multiplies every MWTP value, e.g. 60 to convert per-minute to per-hour.
        #[arg(long, default_value_t = 1.0)]
        unit_factor: f64,
        /// Directory for the individual, distribution and regression tables.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Split-R̂ and effective sample size across chains.
    Diagnose {
        #[arg(required = true)]
        posterior: Vec<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Cronbach's alpha per latent variable.
    CheckReliability { indicators: PathBuf, spec: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Estimate { spec, data_dir, out, chains, seed } => {
            commands::estimate(&spec, &data_dir, &out, chains, seed)
        }
        Command::Simulate { spec, truth, n, seed, out } => commands::simulate(&spec, &truth, n, seed, &out),
        Command::Predict { spec, data_dir, posterior, scenarios, out, seed } => {
            commands::predict(&spec, &data_dir, &posterior, scenarios.as_deref(), out.as_deref(), seed)
        }
        Command::Mwtp { spec, posterior, attribute, regress, unit_factor, out } => {
            commands::mwtp(&spec, &posterior, &attribute, regress.as_deref(), unit_factor, out.as_deref())
        }
        Command::Diagnose { posterior, out } => commands::diagnose(&posterior, out.as_deref()),
        Command::CheckReliability { indicators, spec } => commands::check_reliability(&indicators, &spec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 2 } else { 1 })
        }
    }
}
