//! The `uqbench` command-line pipeline: build a latent index, estimate
//! uncertainties, fit a recalibration on a calibration split, evaluate on a
//! test split and render the calibration plot. Also generates synthetic
//! datasets.

pub mod args;
pub mod commands;
pub mod plot;
pub mod reports;

pub use args::{Cli, Command};
pub use commands::run;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "UQBENCH_THREADS";

/// Sizes the global thread pool from `UQBENCH_THREADS`, if set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
        if n == 0 {
            anyhow::bail!("{THREADS_ENV} must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
