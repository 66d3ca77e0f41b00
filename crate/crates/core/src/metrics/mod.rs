//! Uncertainty validation metrics.
//!
//! The distribution-free checks are the CI(Var(Z)) test ([`ci_var_z_test`])
//! and the binned calibration plot in `calibration`. NLL and miscalibration
//! area assume Gaussian errors; Spearman's rho and AUROC only look at ranking.

mod bootstrap;
pub mod normal;
mod rank;
mod scores;
mod shape;

use thiserror::Error;

pub use bootstrap::{
    bca_ci, bootstrap_distribution, percentile_ci, quantile_sorted, BootstrapConfig, BootstrapInterval,
    BootstrapWarning, Mean, Rms, SampleVariance, Statistic, MIN_BCA_SAMPLES, MIN_RESAMPLES,
};
pub use rank::{auroc, average_ranks, spearman};
pub use scores::{ci_var_z_test, miscalibration_area, nll, var_z, zscores, VarZTest, DEFAULT_GRID_N};
pub use shape::{error_distribution_summary, ErrorSummary, Histogram, DEFAULT_HISTOGRAM_BINS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sigma at index {index} is not positive ({sigma})")]
    ZeroSigma { index: usize, sigma: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("input is constant; statistic undefined")]
    ConstantInput,
    #[error("all instances belong to one class")]
    SingleClass,
    #[error("statistic is not finite")]
    NonFiniteStatistic,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    Ok(())
}

pub(crate) fn check_positive(sigmas: &[f64]) -> Result<(), MetricsError> {
    match sigmas.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        Some(index) => Err(MetricsError::ZeroSigma { index, sigma: sigmas[index] }),
        None => Ok(()),
    }
}
