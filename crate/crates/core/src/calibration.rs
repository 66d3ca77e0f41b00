//! Error-based calibration: binned RMSE-vs-RMV curve, line fit, parity R²,
//! and linear recalibration `sigma' = slope * sigma + intercept`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    self, bca_ci, percentile_ci, BootstrapConfig, MetricsError, Rms, Statistic, MIN_BCA_SAMPLES,
};
use crate::model::{
    join_by_id, CalibrationBin, CalibrationFit, EnergyRecord, MetricsReport, ModelError, UncertaintyEstimate,
};

pub const DEFAULT_BINS: usize = 20;
/// Recalibrated sigmas at or below zero are replaced by this value (eV).
pub const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("need at least {need} points for {bins} bins, got {got}")]
    TooFewSamples { need: usize, got: usize, bins: usize },
    #[error("need at least 3 bins to fit, got {0}")]
    TooFewBins(usize),
    #[error("all bins share the same RMV; the fit is undefined")]
    DegenerateFit,
    #[error("{0} of the sigmas are uncalibrated; recalibrate first or allow uncalibrated input")]
    UncalibratedInput(usize),
    #[error("sigma for `{0}` is already calibrated")]
    AlreadyCalibrated(String),
    #[error("sigma at index {0} is negative or not finite")]
    InvalidSigma(usize),
}

/// Sorts points by sigma and splits them into `n_bins` contiguous bins of
/// equal count; the first `len % n_bins` bins take one extra point.
///
/// Ties in sigma keep input order. Each bin's RMSE interval is a BCa
/// bootstrap interval (percentile bootstrap below `MIN_BCA_SAMPLES` points),
/// widened if needed so that it contains the RMSE itself.
pub fn bin_by_uncertainty(
    errors: &[f64],
    sigmas: &[f64],
    n_bins: usize,
    boot: &BootstrapConfig,
) -> Result<Vec<CalibrationBin>, CalibrationError> {
    if errors.len() != sigmas.len() {
        return Err(MetricsError::LengthMismatch { left: errors.len(), right: sigmas.len() }.into());
    }
    if let Some(i) = sigmas.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(CalibrationError::InvalidSigma(i));
    }
    let n = errors.len();
    if n_bins == 0 || n < 2 * n_bins {
        return Err(CalibrationError::TooFewSamples { need: 2 * n_bins.max(1), got: n, bins: n_bins });
    }
    boot.validate()?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigmas[a].total_cmp(&sigmas[b]));

    let (base, extra) = (n / n_bins, n % n_bins);
    let mut bins = Vec::with_capacity(n_bins);
    let mut start = 0;
    for b in 0..n_bins {
        let len = base + usize::from(b < extra);
        let idx = &order[start..start + len];
        start += len;

        let bin_errors: Vec<f64> = idx.iter().map(|&i| errors[i]).collect();
        let bin_sigmas: Vec<f64> = idx.iter().map(|&i| sigmas[i]).collect();
        let rmse = Rms.compute(&bin_errors);
        let rmv = Rms.compute(&bin_sigmas);
        let cfg = boot.derive(b as u64);
        let ci = if len >= MIN_BCA_SAMPLES {
            bca_ci(&bin_errors, &Rms, &cfg)?
        } else {
            percentile_ci(&bin_errors, &Rms, &cfg)?
        };
        bins.push(CalibrationBin {
            rmv,
            rmse,
            count: len,
            rmse_ci_lo: ci.interval.lo.min(rmse),
            rmse_ci_hi: ci.interval.hi.max(rmse),
        });
    }
    Ok(bins)
}

/// Coefficient of determination; a constant target gives 1 for a perfect
/// prediction and 0 otherwise.
fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Unweighted least-squares line of RMSE on RMV, with R² against that line
/// (`fit_r2`) and against the parity line RMSE = RMV (`parity_r2`).
pub fn fit_calibration(bins: &[CalibrationBin]) -> Result<CalibrationFit, CalibrationError> {
    if bins.len() < 3 {
        return Err(CalibrationError::TooFewBins(bins.len()));
    }
    let n = bins.len() as f64;
    let mx = bins.iter().map(|b| b.rmv).sum::<f64>() / n;
    let my = bins.iter().map(|b| b.rmse).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for b in bins {
        let dx = b.rmv - mx;
        let dy = b.rmse - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CalibrationError::DegenerateFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_fit = 0.0;
    let mut ss_parity = 0.0;
    for b in bins {
        let r = b.rmse - (slope * b.rmv + intercept);
        ss_fit += r * r;
        let p = b.rmse - b.rmv;
        ss_parity += p * p;
    }
    Ok(CalibrationFit {
        slope,
        intercept,
        fit_r2: r_squared(ss_fit, syy),
        parity_r2: r_squared(ss_parity, syy),
        n_bins: bins.len(),
    })
}

/// Bins the points and fits the calibration line in one step.
pub fn calibrate(
    errors: &[f64],
    sigmas: &[f64],
    n_bins: usize,
    boot: &BootstrapConfig,
) -> Result<(Vec<CalibrationBin>, CalibrationFit), CalibrationError> {
    let bins = bin_by_uncertainty(errors, sigmas, n_bins, boot)?;
    let fit = fit_calibration(&bins)?;
    Ok((bins, fit))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recalibration {
    pub estimates: Vec<UncertaintyEstimate>,
    /// Ids whose recalibrated sigma was floored at [`SIGMA_FLOOR`].
    pub floored: Vec<String>,
}

/// Applies `sigma' = slope * sigma + intercept` and marks the results
/// calibrated.
pub fn recalibrate(estimates: &[UncertaintyEstimate], fit: &CalibrationFit) -> Result<Recalibration, CalibrationError> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut floored = Vec::new();
    for est in estimates {
        if est.is_calibrated() {
            return Err(CalibrationError::AlreadyCalibrated(est.system_id().to_string()));
        }
        let mut sigma = fit.slope * est.sigma() + fit.intercept;
        if sigma <= 0.0 {
            log::warn!("recalibrated sigma for `{}` is {sigma}; flooring at {SIGMA_FLOOR}", est.system_id());
            floored.push(est.system_id().to_string());
            sigma = SIGMA_FLOOR;
        }
        out.push(UncertaintyEstimate::with_flag(est.system_id(), sigma, est.method(), true)?);
    }
    Ok(Recalibration { estimates: out, floored })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rmv: f64,
    pub rmse: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub count: usize,
}

/// Plot-ready calibration points, in bin order.
pub fn calibration_curve(bins: &[CalibrationBin]) -> Vec<CurvePoint> {
    bins.iter()
        .map(|b| CurvePoint { rmv: b.rmv, rmse: b.rmse, ci_lo: b.rmse_ci_lo, ci_hi: b.rmse_ci_hi, count: b.count })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateOptions {
    /// Errors with magnitude above this (eV) are the positive class for AUROC.
    pub auroc_threshold: f64,
    pub n_bins: usize,
    pub grid_n: usize,
    pub boot: BootstrapConfig,
    pub allow_uncalibrated: bool,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            auroc_threshold: 0.1,
            n_bins: DEFAULT_BINS,
            grid_n: metrics::DEFAULT_GRID_N,
            boot: BootstrapConfig::default(),
            allow_uncalibrated: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub bins: Vec<CalibrationBin>,
}

/// Full metric suite for one set of uncertainties on one split.
pub fn evaluate(
    records: &[EnergyRecord],
    estimates: &[UncertaintyEstimate],
    opts: &EvaluateOptions,
) -> Result<Evaluation, CalibrationError> {
    let pairs = join_by_id(records, estimates)?;
    if !opts.allow_uncalibrated {
        let raw = estimates.iter().filter(|e| !e.is_calibrated()).count();
        if raw > 0 {
            return Err(CalibrationError::UncalibratedInput(raw));
        }
    }
    let errors: Vec<f64> = pairs.iter().map(|(r, _)| r.error()).collect();
    let sigmas: Vec<f64> = pairs.iter().map(|(_, e)| e.sigma()).collect();
    let abs_errors: Vec<f64> = errors.iter().map(|e| e.abs()).collect();

    let test = metrics::ci_var_z_test(&errors, &sigmas, &opts.boot)?;
    let (bins, fit) = calibrate(&errors, &sigmas, opts.n_bins, &opts.boot.derive(u64::MAX))?;
    let spearman_rho = match metrics::spearman(&abs_errors, &sigmas) {
        Ok(rho) => Some(rho),
        Err(MetricsError::ConstantInput) => {
            log::warn!("Spearman correlation undefined: constant input");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let auroc = match metrics::auroc(&abs_errors, &sigmas, opts.auroc_threshold) {
        Ok(a) => Some(a),
        Err(MetricsError::SingleClass) => {
            log::warn!("AUROC undefined: every error falls on one side of {} eV", opts.auroc_threshold);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let report = MetricsReport {
        parity_r2: fit.parity_r2,
        fit_r2: fit.fit_r2,
        slope: fit.slope,
        intercept: fit.intercept,
        nll: metrics::nll(&errors, &sigmas)?,
        spearman_rho,
        auroc,
        miscal_area: metrics::miscalibration_area(&errors, &sigmas, opts.grid_n)?,
        var_z: test.var_z,
        ci_var_z: test.interval,
        calibrated_flag: test.calibrated,
    };
    Ok(Evaluation { report, bins })
}
