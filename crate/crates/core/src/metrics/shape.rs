use serde::{Deserialize, Serialize};

use super::MetricsError;

pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// Equal-width histogram over `[-half_range, half_range]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub half_range: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len();
        (0..=n).map(|k| -self.half_range + 2.0 * self.half_range * k as f64 / n as f64).collect()
    }
}

/// Shape diagnostics of an error distribution.
///
/// `stdev` uses divisor n - 1; skewness and excess kurtosis are the plain
/// moment ratios `m3 / m2^1.5` and `m4 / m2^2 - 3` with divisor n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub mean: f64,
    pub stdev: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub histogram: Histogram,
}

pub fn error_distribution_summary(errors: &[f64], n_bins: usize) -> Result<ErrorSummary, MetricsError> {
    if errors.len() < 4 {
        return Err(MetricsError::TooFewSamples { need: 4, got: errors.len() });
    }
    if n_bins == 0 {
        return Err(MetricsError::InvalidConfig("histogram needs at least one bin".into()));
    }
    if errors.iter().all(|&e| e == errors[0]) {
        return Err(MetricsError::ConstantInput);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for e in errors {
        let d = e - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let stdev = (m2 / (n - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);

    let half_range = errors.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let mut counts = vec![0usize; n_bins];
    let width = 2.0 * half_range / n_bins as f64;
    for e in errors {
        let k = (((e + half_range) / width).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }

    Ok(ErrorSummary {
        n: errors.len(),
        mean,
        stdev,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        histogram: Histogram { half_range, counts },
    })
}
