use super::bootstrap::{bca_ci, BootstrapConfig, BootstrapWarning, SampleVariance, Statistic, MIN_BCA_SAMPLES};
use super::{check_lengths, check_positive, normal, MetricsError};
use crate::model::IntervalCI;

pub const DEFAULT_GRID_N: usize = 100;

/// `z_i = error_i / sigma_i`.
pub fn zscores(errors: &[f64], sigmas: &[f64]) -> Result<Vec<f64>, MetricsError> {
    check_lengths(errors.len(), sigmas.len())?;
    check_positive(sigmas)?;
    Ok(errors.iter().zip(sigmas).map(|(e, s)| e / s).collect())
}

/// Sample variance of z-scores (mean subtracted, divisor n - 1).
pub fn var_z(z: &[f64]) -> Result<f64, MetricsError> {
    if z.len() < 2 {
        return Err(MetricsError::TooFewSamples { need: 2, got: z.len() });
    }
    Ok(SampleVariance.compute(z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarZTest {
    pub var_z: f64,
    pub interval: IntervalCI,
    pub calibrated: bool,
    pub warning: Option<BootstrapWarning>,
}

/// Distribution-free global calibration test: BCa interval of Var(Z);
/// calibrated iff the interval contains 1.
pub fn ci_var_z_test(errors: &[f64], sigmas: &[f64], cfg: &BootstrapConfig) -> Result<VarZTest, MetricsError> {
    let z = zscores(errors, sigmas)?;
    if z.len() < MIN_BCA_SAMPLES {
        return Err(MetricsError::TooFewSamples { need: MIN_BCA_SAMPLES, got: z.len() });
    }
    let boot = bca_ci(&z, &SampleVariance, cfg)?;
    Ok(VarZTest {
        var_z: boot.estimate,
        interval: boot.interval,
        calibrated: boot.interval.contains(1.0),
        warning: boot.warning,
    })
}

/// Mean Gaussian negative log likelihood of the errors given the sigmas.
pub fn nll(errors: &[f64], sigmas: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(errors.len(), sigmas.len())?;
    check_positive(sigmas)?;
    if errors.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let total: f64 = errors
        .iter()
        .zip(sigmas)
        .map(|(e, s)| 0.5 * ln_2pi + s.ln() + e * e / (2.0 * s * s))
        .sum();
    Ok(total / errors.len() as f64)
}

/// Area between the observed and expected coverage curves of Gaussian
/// central intervals.
///
/// Expected coverage runs over `grid_n + 1` evenly spaced points spanning
/// [0, 1] inclusive; at `p` the interval half-width is
/// `sigma * quantile((1 + p) / 2)`. The gap is integrated with the trapezoid
/// rule, so the result lies in [0, 0.5].
pub fn miscalibration_area(errors: &[f64], sigmas: &[f64], grid_n: usize) -> Result<f64, MetricsError> {
    check_lengths(errors.len(), sigmas.len())?;
    check_positive(sigmas)?;
    if errors.len() < 2 {
        return Err(MetricsError::TooFewSamples { need: 2, got: errors.len() });
    }
    if grid_n == 0 {
        return Err(MetricsError::InvalidConfig("grid_n must be positive".into()));
    }
    let mut ratios: Vec<f64> = errors.iter().zip(sigmas).map(|(e, s)| e.abs() / s).collect();
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len() as f64;
    let gap = |k: usize| {
        let p = k as f64 / grid_n as f64;
        let observed = if k == grid_n {
            1.0
        } else {
            let half_width = normal::quantile(0.5 + 0.5 * p);
            ratios.partition_point(|&r| r <= half_width) as f64 / n
        };
        (observed - p).abs()
    };
    let gaps: Vec<f64> = (0..=grid_n).map(gap).collect();
    let step = 1.0 / grid_n as f64;
    Ok(gaps.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum())
}
