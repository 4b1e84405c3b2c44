//! `palm` — command-line harness for precision-aggregated local models:
//! generate benchmark data, fit/save/load models, predict, and run the
//! built-in benchmark scenarios.

mod artifacts;
mod bench;
mod config;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use palm::{PalmError, Result};

#[derive(Parser)]
#[command(
    name = "palm",
    version,
    about = "Gaussian-process prediction from aggregated local experts"
)]
struct Cli {
    /// Flat `key = value` config file; flags override it, it overrides defaults
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master RNG seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker-thread cap for all parallel regions; falls back to the
    /// PALM_THREADS environment variable, then to all available cores.
    /// `--threads 1` gives a fully serial, reproducible reference run.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for written artifacts (overrides the config file)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train.csv (noisy) and test.csv (noise-free) for the
    /// configured surface and grids
    Gen,
    /// Fit the configured model to a training CSV; writes model.json and
    /// a one-row fit.csv (k, n, tau2, eta, p, fit_seconds)
    Fit {
        /// Training dataset (columns x1..xd,y)
        train: PathBuf,
    },
    /// Predict from a saved model; writes predictions.csv
    /// (x1..xd,mean,variance; input row order preserved)
    Predict {
        /// Saved model file (model.json)
        model: PathBuf,
        /// The training dataset the model was fitted to
        train: PathBuf,
        /// Prediction inputs (columns x1..xd; a trailing y is ignored)
        inputs: PathBuf,
    },
    /// Run a named benchmark scenario; writes metrics.csv, timings.csv
    /// and slice.csv
    Bench {
        /// One of: herbie-noisy, herbie-det, glee-seq, michalewicz-3d
        scenario: String,
    },
}

/// Applies the thread cap: flag first, then PALM_THREADS, else rayon's
/// default (all available cores).
fn init_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("PALM_THREADS") {
            Ok(s) => Some(s.trim().parse().map_err(|_| {
                PalmError::InvalidArgument(format!(
                    "PALM_THREADS must be a positive integer, got {s:?}"
                ))
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(PalmError::InvalidArgument(
                "thread count must be at least 1".into(),
            ));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PalmError::InvalidArgument(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;

    let mut rc = match &cli.command {
        Command::Bench { scenario } => bench::scenario_defaults(scenario)?,
        _ => RunConfig::default(),
    };
    if let Some(path) = &cli.config {
        rc.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        rc.seed = seed;
    }
    if let Some(out) = &cli.out {
        rc.out = out.clone();
    }
    rc.validate()?;

    match &cli.command {
        Command::Gen => run::cmd_gen(&rc),
        Command::Fit { train } => run::cmd_fit(&rc, train),
        Command::Predict {
            model,
            train,
            inputs,
        } => run::cmd_predict(&rc, model, train, inputs),
        Command::Bench { scenario } => bench::cmd_bench(&rc, scenario),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
