//! Experiment driver for the genreg library: dataset synthesis, model
//! training, generator evaluation and reconstruction sweeps, all
//! reproducible from a config file and a seed.

mod commands;
mod config;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{load_config, DataSection, ExperimentConfig};
use util::{exit_code_for, resolve_jobs, resolve_out};

#[derive(Parser)]
#[command(
    name = "genreg",
    about = "Generative regularisers for linear inverse problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shared {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel jobs; overrides GENREG_JOBS and the config.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides GENREG_OUT and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise Shapes/Shapes+ or import MNIST into the split cache.
    Data {
        #[command(flatten)]
        shared: Shared,
        /// Dataset kind: shapes | shapes-plus | mnist.
        #[arg(long)]
        kind: Option<String>,
        /// Training image count (test defaults to an eighth).
        #[arg(long)]
        n: Option<usize>,
        /// Image side length in pixels.
        #[arg(long)]
        image_size: Option<usize>,
    },
    /// Train an AE, VAE or WGAN-GP on the cached train split.
    Train {
        #[command(flatten)]
        shared: Shared,
        /// Model kind: ae | vae | gan (overrides the config).
        #[arg(long)]
        model: Option<String>,
    },
    /// Run the generator-evaluation suite on saved checkpoints.
    Evaluate {
        #[command(flatten)]
        shared: Shared,
    },
    /// Run reconstruction sweeps and emit metric tables.
    Reconstruct {
        #[command(flatten)]
        shared: Shared,
    },
}

fn load_or_default(shared: &Shared) -> Result<ExperimentConfig, String> {
    match &shared.config {
        Some(path) => load_config(path),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run() -> Result<(), (String, i32)> {
    let cli = Cli::parse();
    let config_err = |msg: String| (msg, 1);

    match cli.command {
        Command::Data {
            shared,
            kind,
            n,
            image_size,
        } => {
            let cfg = load_or_default(&shared).map_err(config_err)?;
            let seed = shared.seed.or(cfg.seed).unwrap_or(0);
            let out = resolve_out(shared.out.as_deref(), cfg.out.as_deref());
            let mut section = cfg.data.unwrap_or(DataSection {
                kind: "shapes".to_string(),
                image_size: 32,
                train_count: 4_000,
                test_count: 500,
                intensity: None,
                mnist_dir: None,
            });
            if let Some(kind) = kind {
                section.kind = kind;
            }
            if let Some(n) = n {
                section.train_count = n;
                section.test_count = (n / 8).max(1);
            }
            if let Some(s) = image_size {
                section.image_size = s;
            }
            commands::data::run(&out, &commands::data::DataArgs { section, seed })
                .map_err(|e| (e.to_string(), exit_code_for(&e)))
        }
        Command::Train { shared, model } => {
            let cfg = load_or_default(&shared).map_err(config_err)?;
            let seed = shared.seed.or(cfg.seed).unwrap_or(0);
            let out = resolve_out(shared.out.as_deref(), cfg.out.as_deref());
            let mut section = cfg
                .train
                .ok_or_else(|| ("config has no [train] section".to_string(), 1))?;
            if let Some(model) = model {
                section.model = model;
            }
            commands::train::run(&out, &commands::train::TrainArgs { section, seed })
                .map_err(|e| (e.to_string(), exit_code_for(&e)))
        }
        Command::Evaluate { shared } => {
            let cfg = load_or_default(&shared).map_err(config_err)?;
            let seed = shared.seed.or(cfg.seed).unwrap_or(0);
            let out = resolve_out(shared.out.as_deref(), cfg.out.as_deref());
            let section = cfg
                .evaluate
                .ok_or_else(|| ("config has no [evaluate] section".to_string(), 1))?;
            commands::evaluate::run(&out, &commands::evaluate::EvaluateArgs { section, seed })
                .map_err(|e| (e.to_string(), exit_code_for(&e)))
        }
        Command::Reconstruct { shared } => {
            let cfg = load_or_default(&shared).map_err(config_err)?;
            let seed = shared.seed.or(cfg.seed).unwrap_or(0);
            let out = resolve_out(shared.out.as_deref(), cfg.out.as_deref());
            let jobs = resolve_jobs(shared.jobs, cfg.jobs);
            let section = cfg
                .reconstruct
                .ok_or_else(|| ("config has no [reconstruct] section".to_string(), 1))?;
            commands::reconstruct::run(
                &out,
                &commands::reconstruct::ReconstructArgs {
                    section,
                    seed,
                    jobs,
                },
            )
            .map_err(|e| (e.to_string(), exit_code_for(&e)))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((msg, code)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
