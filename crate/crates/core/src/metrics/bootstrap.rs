//! Bias-corrected and accelerated (BCa) bootstrap confidence intervals.
//!
//! Resample `b` draws its indices from its own ChaCha stream (`seed`, stream
//! `b`), so the bootstrap distribution is bitwise identical no matter how the
//! resamples are scheduled across threads.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normal, MetricsError};
use crate::model::IntervalCI;

/// Smallest sample the BCa interval is computed for.
pub const MIN_BCA_SAMPLES: usize = 10;
/// Smallest number of bootstrap resamples accepted.
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { n_resamples: 2000, level: 0.95, seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn new(n_resamples: usize, level: f64, seed: u64) -> Result<Self, MetricsError> {
        let cfg = Self { n_resamples, level, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.n_resamples < MIN_RESAMPLES {
            return Err(MetricsError::InvalidConfig(format!(
                "n_resamples must be >= {MIN_RESAMPLES}, got {}",
                self.n_resamples
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(MetricsError::InvalidConfig(format!("level must be in (0, 1), got {}", self.level)));
        }
        Ok(())
    }

    /// Same settings with a seed derived from `self.seed` and `salt`.
    pub fn derive(&self, salt: u64) -> Self {
        Self { seed: splitmix64(self.seed ^ splitmix64(salt.wrapping_add(0x9E37_79B9_7F4A_7C15))), ..*self }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A scalar statistic over a sample.
///
/// `leave_one_out` defaults to recomputing the statistic `n` times; the
/// built-in statistics override it with O(n) update formulas.
pub trait Statistic: Sync {
    fn compute(&self, sample: &[f64]) -> f64;

    fn leave_one_out(&self, sample: &[f64]) -> Vec<f64> {
        let mut buf = Vec::with_capacity(sample.len().saturating_sub(1));
        (0..sample.len())
            .map(|i| {
                buf.clear();
                buf.extend_from_slice(&sample[..i]);
                buf.extend_from_slice(&sample[i + 1..]);
                self.compute(&buf)
            })
            .collect()
    }
}

impl<F> Statistic for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn compute(&self, sample: &[f64]) -> f64 {
        self(sample)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Mean;

impl Statistic for Mean {
    fn compute(&self, sample: &[f64]) -> f64 {
        sample.iter().sum::<f64>() / sample.len() as f64
    }

    fn leave_one_out(&self, sample: &[f64]) -> Vec<f64> {
        let n = sample.len() as f64;
        let total: f64 = sample.iter().sum();
        sample.iter().map(|x| (total - x) / (n - 1.0)).collect()
    }
}

/// Sample variance with mean subtraction and divisor `n - 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleVariance;

impl Statistic for SampleVariance {
    fn compute(&self, sample: &[f64]) -> f64 {
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    }

    fn leave_one_out(&self, sample: &[f64]) -> Vec<f64> {
        let n = sample.len() as f64;
        let mean = sample.iter().sum::<f64>() / n;
        let m2: f64 = sample.iter().map(|x| (x - mean) * (x - mean)).sum();
        sample
            .iter()
            .map(|&x| {
                let mean_without = (n * mean - x) / (n - 1.0);
                (m2 - (x - mean) * (x - mean_without)) / (n - 2.0)
            })
            .collect()
    }
}

/// Root mean square, `sqrt(mean(x^2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rms;

impl Statistic for Rms {
    fn compute(&self, sample: &[f64]) -> f64 {
        (sample.iter().map(|x| x * x).sum::<f64>() / sample.len() as f64).sqrt()
    }

    fn leave_one_out(&self, sample: &[f64]) -> Vec<f64> {
        let n = sample.len() as f64;
        let ss: f64 = sample.iter().map(|x| x * x).sum();
        sample.iter().map(|x| ((ss - x * x).max(0.0) / (n - 1.0)).sqrt()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapWarning {
    /// Every resample produced the same statistic; the interval has zero width.
    DegenerateStatistic,
    /// No resample fell on one side of the estimate; the bias correction was clamped.
    ExtremeBias,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub interval: IntervalCI,
    pub bias_correction: f64,
    pub acceleration: f64,
    pub warning: Option<BootstrapWarning>,
}

/// Statistic values over `cfg.n_resamples` with-replacement resamples, in
/// resample order.
pub fn bootstrap_distribution<S: Statistic + ?Sized>(samples: &[f64], statistic: &S, cfg: &BootstrapConfig) -> Vec<f64> {
    let n = samples.len();
    // max(1) keeps the samplers valid for an empty sample, which draws nothing
    let narrow = u32::try_from(n).ok().map(|m| Uniform::new(0, m.max(1)));
    let wide = Uniform::new(0, n.max(1));
    (0..cfg.n_resamples as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(b);
                buf.clear();
                match narrow {
                    Some(u) => buf.extend((0..n).map(|_| samples[u.sample(&mut rng) as usize])),
                    None => buf.extend((0..n).map(|_| samples[wide.sample(&mut rng)])),
                }
                statistic.compute(buf)
            },
        )
        .collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// BCa bootstrap confidence interval for `statistic` over `samples`.
pub fn bca_ci<S: Statistic + ?Sized>(
    samples: &[f64],
    statistic: &S,
    cfg: &BootstrapConfig,
) -> Result<BootstrapInterval, MetricsError> {
    cfg.validate()?;
    if samples.len() < MIN_BCA_SAMPLES {
        return Err(MetricsError::TooFewSamples { need: MIN_BCA_SAMPLES, got: samples.len() });
    }
    let estimate = statistic.compute(samples);
    if !estimate.is_finite() {
        return Err(MetricsError::NonFiniteStatistic);
    }
    let mut boot = bootstrap_distribution(samples, statistic, cfg);
    if boot.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteStatistic);
    }
    boot.sort_by(f64::total_cmp);
    let level = cfg.level;
    if boot[0] == boot[boot.len() - 1] {
        log::warn!("bootstrap distribution is degenerate; reporting a zero-width interval");
        return Ok(BootstrapInterval {
            estimate,
            interval: IntervalCI { lo: estimate, hi: estimate, level },
            bias_correction: 0.0,
            acceleration: 0.0,
            warning: Some(BootstrapWarning::DegenerateStatistic),
        });
    }

    let n_boot = boot.len() as f64;
    let below = boot.partition_point(|&v| v < estimate);
    let not_above = boot.partition_point(|&v| v <= estimate);
    // ties with the estimate count half
    let mut frac = (below + not_above) as f64 / (2.0 * n_boot);
    let mut warning = None;
    if frac <= 0.0 || frac >= 1.0 {
        frac = frac.clamp(0.5 / n_boot, 1.0 - 0.5 / n_boot);
        warning = Some(BootstrapWarning::ExtremeBias);
    }
    let z0 = normal::quantile(frac);

    let jack = statistic.leave_one_out(samples);
    let jack_mean = jack.iter().sum::<f64>() / jack.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for j in &jack {
        let d = jack_mean - j;
        num += d * d * d;
        den += d * d;
    }
    let acceleration = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    let alpha = 1.0 - level;
    let adjust = |z: f64, fallback: f64| {
        let shift = z0 + z;
        let denom = 1.0 - acceleration * shift;
        if denom <= 0.0 {
            return fallback;
        }
        let p = normal::cdf(z0 + shift / denom);
        if p.is_finite() {
            p
        } else {
            fallback
        }
    };
    let p_lo = adjust(normal::quantile(alpha / 2.0), 0.0);
    let p_hi = adjust(normal::quantile(1.0 - alpha / 2.0), 1.0);
    let lo = quantile_sorted(&boot, p_lo);
    let hi = quantile_sorted(&boot, p_hi);
    Ok(BootstrapInterval {
        estimate,
        interval: IntervalCI { lo: lo.min(hi), hi: hi.max(lo), level },
        bias_correction: z0,
        acceleration,
        warning,
    })
}

/// Plain percentile bootstrap interval. Used where a sample is too small for
/// the jackknife acceleration estimate to be meaningful.
pub fn percentile_ci<S: Statistic + ?Sized>(
    samples: &[f64],
    statistic: &S,
    cfg: &BootstrapConfig,
) -> Result<BootstrapInterval, MetricsError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(MetricsError::TooFewSamples { need: 1, got: 0 });
    }
    let estimate = statistic.compute(samples);
    let mut boot = bootstrap_distribution(samples, statistic, cfg);
    if !estimate.is_finite() || boot.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteStatistic);
    }
    boot.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.level;
    let warning = (boot[0] == boot[boot.len() - 1]).then_some(BootstrapWarning::DegenerateStatistic);
    Ok(BootstrapInterval {
        estimate,
        interval: IntervalCI {
            lo: quantile_sorted(&boot, alpha / 2.0),
            hi: quantile_sorted(&boot, 1.0 - alpha / 2.0),
            level: cfg.level,
        },
        bias_correction: 0.0,
        acceleration: 0.0,
        warning,
    })
}
