//! Command-line interface: simulate synthetic circular fields, fit the
//! wrapped/projected Gaussian-process models with parallel chains,
//! krige onto target sites, report convergence, and score predictions.
//!
//! Exit codes: 0 on success, 2 for validation failures (bad config,
//! arguments, or data), 3 for numeric failures.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use circgp::config::RunConfig;
use circgp::error::{Error, Result};
use circgp::runner;

#[derive(Parser)]
#[command(
    name = "circgp",
    version,
    about = "Bayesian Gaussian-process models for circular data (wrapped and projected normal)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the config's [simulate] block.
    Simulate {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset path (CSV); a *_truth.toml sidecar is written
        /// next to it.
        #[arg(long)]
        out: PathBuf,
        /// Replace the config's seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Fit the configured model with parallel chains.
    Fit {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV; overrides the config's data.path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run directory for draws, end states, manifest, diagnostics.
        #[arg(long)]
        out: PathBuf,
        /// Replace the config's seed.
        #[arg(long)]
        seed_override: Option<u64>,
        /// Replace the config's chain count.
        #[arg(long)]
        chains: Option<u32>,
        /// Continue the run already in --out instead of starting fresh.
        #[arg(long)]
        warm_start: bool,
    },
    /// Krige posterior predictive draws onto target sites.
    Predict {
        /// Run directory produced by fit.
        #[arg(long)]
        draws: PathBuf,
        /// The dataset the run was fitted on (checksum-verified).
        #[arg(long)]
        data: PathBuf,
        /// Target sites CSV (site_id,x,y[,time]).
        #[arg(long)]
        targets: PathBuf,
        /// Output directory for prediction files.
        #[arg(long)]
        out: PathBuf,
        /// Seed for the predictive sampler (default: the fit's seed).
        #[arg(long)]
        seed_override: Option<u64>,
        /// Write only per-target summaries, not the full sample matrix.
        #[arg(long)]
        no_samples: bool,
    },
    /// Convergence report: per-parameter PSRF and multivariate PSRF.
    Diagnose {
        /// Run directory produced by fit.
        #[arg(long)]
        draws: PathBuf,
        /// Report path (default: diagnostics.csv inside the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score stored predictions against held-out observations.
    Score {
        /// Prediction directory produced by predict (with samples).
        #[arg(long)]
        pred: PathBuf,
        /// Held-out truth dataset (same format as fitting data).
        #[arg(long)]
        truth: PathBuf,
        /// Output directory (default: the prediction directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest planar distance at which a target is matched to a
        /// truth site.
        #[arg(long, default_value_t = 1e-6)]
        max_match_distance: f64,
    },
}

fn load_config(path: &PathBuf, seed_override: Option<u64>, chains: Option<u32>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply_env_overrides(std::env::vars())?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    if let Some(n) = chains {
        cfg.n_chains = n;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed_override } => {
            let cfg = load_config(&config, seed_override, None)?;
            runner::run_simulate(&cfg, &out)
        }
        Command::Fit { config, data, out, seed_override, chains, warm_start } => {
            let cfg = load_config(&config, seed_override, chains)?;
            let data_path = match data {
                Some(p) => p,
                None => cfg
                    .data
                    .as_ref()
                    .and_then(|d| d.path.clone())
                    .ok_or_else(|| {
                        Error::Config(
                            "no dataset: pass --data or set data.path in the config".into(),
                        )
                    })?,
            };
            runner::run_fit(&cfg, &data_path, &out, warm_start).map(|_| ())
        }
        Command::Predict { draws, data, targets, out, seed_override, no_samples } => {
            runner::run_predict(&draws, &data, &targets, &out, seed_override, !no_samples)
        }
        Command::Diagnose { draws, out } => runner::run_diagnose(&draws, out.as_deref()),
        Command::Score { pred, truth, out, max_match_distance } => {
            runner::run_score(&pred, &truth, out.as_deref(), max_match_distance)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
