use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use uqbench_core::estimators::{AggregationMode, FrameStrategy};

#[derive(Debug, Parser)]
#[command(name = "uqbench", version, about = "Uncertainty estimation, recalibration and validation for energy predictions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a nearest-neighbour distance index from training latents.
    IndexBuild(IndexBuildArgs),
    /// Produce uncalibrated uncertainties.
    #[command(subcommand)]
    Estimate(EstimateCommand),
    /// Fit the error-based recalibration line on a calibration split.
    Calibrate(CalibrateArgs),
    /// Recalibrate and compute the full metric suite on a test split.
    Evaluate(EvaluateArgs),
    /// Render a report as a calibration plot and a bin table.
    Report(ReportArgs),
    /// Generate a synthetic dataset in every file format.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct IndexBuildArgs {
    #[arg(long)]
    pub latents: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EstimateCommand {
    /// Nearest-neighbour latent distance.
    Distance(DistanceArgs),
    /// Ensemble variance over a relaxation trajectory.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DistanceArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub latents: PathBuf,
    /// atom-mean, atom-sum, atom-max or system-mean
    #[arg(long, default_value = "atom-mean")]
    pub agg: AggregationMode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// first, last, mean or max
    #[arg(long, default_value = "mean")]
    pub frame: FrameStrategy,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub sigmas: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[command(flatten)]
    pub boot: BootstrapArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub sigmas: PathBuf,
    /// Recalibration fit from `calibrate`; applied before evaluation.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// |error| above this (eV) is the positive class for AUROC.
    #[arg(long, default_value_t = 0.1)]
    pub auroc_threshold: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[command(flatten)]
    pub boot: BootstrapArgs,
    /// Evaluate sigmas that were never recalibrated.
    #[arg(long)]
    pub allow_uncalibrated: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}
