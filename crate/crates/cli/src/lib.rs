//! Batch driver for the onebit pipeline.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{ConfigError, RunConfig, Stage};

#[derive(Debug, Parser)]
#[command(name = "onebit", version, about = "Reconstruct band-limited images from noisy single-bit, multi-bit or full-precision pixels")]
pub struct Cli {
    /// Run configuration (`key = value` lines). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `out` from the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed overriding `seed` from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Changes speed only, never results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the ground-truth image (`truth.cbim`, `truth.pgm`).
    Generate,
    /// Sample, add noise and quantize (`samples.cbss` plus sidecar).
    Acquire,
    /// Estimate the image from samples (`estimate.cbim`, `estimate.pgm`, `reconstruct.csv`).
    Reconstruct {
        /// Sample container; defaults to `<out>/samples.cbss`.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Distortion versus oversampling factor for each quantizer (`sweep.csv`).
    Sweep,
    /// Summarize a sweep CSV.
    Report {
        /// Sweep CSV; defaults to `<out>/sweep.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(#[from] onebit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let stage = match cli.command {
        Command::Generate => Stage::Generate,
        Command::Acquire => Stage::Acquire,
        Command::Reconstruct { .. } => Stage::Reconstruct,
        Command::Sweep => Stage::Sweep,
        Command::Report { .. } => Stage::Report,
    };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, stage)?,
        None => RunConfig::from_text("", std::path::Path::new("."), stage)?,
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs one subcommand and returns the text to print on stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let cfg = load_config(cli)?;
    let listing = |files: &[PathBuf]| {
        files
            .iter()
            .map(|f| format!("wrote {}\n", f.display()))
            .collect::<String>()
    };
    Ok(match &cli.command {
        Command::Generate => listing(&commands::generate(&cfg)?),
        Command::Acquire => {
            let (path, samples) = commands::acquire_samples(&cfg)?;
            format!(
                "{}{} samples per axis at stride {}\n",
                listing(&[path]),
                samples.lattice.count,
                samples.lattice.stride
            )
        }
        Command::Reconstruct { samples } => {
            let path = samples.clone().unwrap_or_else(|| cfg.out.join("samples.cbss"));
            let outcome = commands::reconstruct(&cfg, &path)?;
            format!("{}mse {:.6e}\n", listing(&outcome.files), outcome.mse)
        }
        Command::Sweep => {
            let (path, _) = commands::sweep(&cfg)?;
            format!("{}{}", listing(std::slice::from_ref(&path)), commands::report(&path)?)
        }
        Command::Report { input } => {
            let path = input.clone().unwrap_or_else(|| cfg.out.join("sweep.csv"));
            let text = commands::report(&path)?;
            std::fs::create_dir_all(&cfg.out).map_err(onebit::Error::from)?;
            std::fs::write(cfg.out.join("report.txt"), &text).map_err(onebit::Error::from)?;
            text
        }
    })
}
