//! Core domain types shared by the estimators, metrics and file formats.
//!
//! Everything here is immutable after construction. Constructors validate
//! invariants and return [`ModelError`] rather than truncating or repairing
//! input.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("system_id must be non-empty")]
    EmptySystemId,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("sigma for `{id}` must be finite and >= 0, got {sigma}")]
    InvalidSigma { id: String, sigma: f64 },
    #[error("latent dimension must be positive")]
    ZeroDim,
    #[error("system `{0}` has zero atoms")]
    EmptySystem(String),
    #[error("latent data has {actual} rows but atom counts sum to {expected}")]
    RowMismatch { expected: usize, actual: usize },
    #[error("latent data length {len} is not a multiple of dim {dim}")]
    RaggedData { len: usize, dim: usize },
    #[error("{ids} system ids but {counts} atom counts")]
    CountMismatch { ids: usize, counts: usize },
    #[error("duplicate system_id `{0}`")]
    DuplicateId(String),
    #[error("trajectory `{0}` has no frames")]
    NoFrames(String),
    #[error("trajectory `{id}` frame {frame} has {members} members, need at least 2")]
    TooFewMembers { id: String, frame: usize, members: usize },
    #[error("trajectory `{id}` frame {frame} has {members} members, expected {expected}")]
    RaggedFrames { id: String, frame: usize, members: usize, expected: usize },
    #[error("join failed: {0}")]
    JoinFailure(String),
}

/// One system's predicted and reference relaxed energy, in eV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub system_id: String,
    pub e_pred: f64,
    pub e_true: f64,
}

impl EnergyRecord {
    pub fn new(system_id: impl Into<String>, e_pred: f64, e_true: f64) -> Result<Self, ModelError> {
        let system_id = system_id.into();
        if system_id.is_empty() {
            return Err(ModelError::EmptySystemId);
        }
        if !e_pred.is_finite() || !e_true.is_finite() {
            return Err(ModelError::NonFinite("energy"));
        }
        Ok(Self { system_id, e_pred, e_true })
    }

    /// Signed prediction error `e_pred - e_true`.
    pub fn error(&self) -> f64 {
        self.e_pred - self.e_true
    }
}

/// Which estimator produced an uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Distance,
    Ensemble,
    External,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Distance => "distance",
            Method::Ensemble => "ensemble",
            Method::External => "external",
        })
    }
}

/// A scalar uncertainty (dispersion, eV) for one system.
///
/// Estimators only ever produce uncalibrated values; the calibrated flag is
/// set by applying a [`CalibrationFit`] (see `calibration::recalibrate`) or
/// by reading a file that records it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyEstimate {
    system_id: String,
    sigma: f64,
    method: Method,
    calibrated: bool,
}

impl UncertaintyEstimate {
    pub fn new(system_id: impl Into<String>, sigma: f64, method: Method) -> Result<Self, ModelError> {
        Self::with_flag(system_id, sigma, method, false)
    }

    pub(crate) fn with_flag(
        system_id: impl Into<String>,
        sigma: f64,
        method: Method,
        calibrated: bool,
    ) -> Result<Self, ModelError> {
        let system_id = system_id.into();
        if system_id.is_empty() {
            return Err(ModelError::EmptySystemId);
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(ModelError::InvalidSigma { id: system_id, sigma });
        }
        Ok(Self { system_id, sigma, method, calibrated })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }
}

/// Per-atom latent vectors for a set of systems, stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMatrix {
    dim: usize,
    system_ids: Vec<String>,
    atom_counts: Vec<u32>,
    /// Row offset of each system, plus a trailing total.
    offsets: Vec<usize>,
    data: Vec<f32>,
}

impl LatentMatrix {
    pub fn new(
        dim: usize,
        system_ids: Vec<String>,
        atom_counts: Vec<u32>,
        data: Vec<f32>,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        if system_ids.len() != atom_counts.len() {
            return Err(ModelError::CountMismatch { ids: system_ids.len(), counts: atom_counts.len() });
        }
        if !data.len().is_multiple_of(dim) {
            return Err(ModelError::RaggedData { len: data.len(), dim });
        }
        check_unique(system_ids.iter().map(String::as_str))?;
        let mut offsets = Vec::with_capacity(atom_counts.len() + 1);
        let mut total = 0usize;
        for (id, &count) in system_ids.iter().zip(&atom_counts) {
            if id.is_empty() {
                return Err(ModelError::EmptySystemId);
            }
            if count == 0 {
                return Err(ModelError::EmptySystem(id.clone()));
            }
            offsets.push(total);
            total += count as usize;
        }
        offsets.push(total);
        if total != data.len() / dim {
            return Err(ModelError::RowMismatch { expected: total, actual: data.len() / dim });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("latent data"));
        }
        Ok(Self { dim, system_ids, atom_counts, offsets, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_systems(&self) -> usize {
        self.system_ids.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn system_ids(&self) -> &[String] {
        &self.system_ids
    }

    pub fn atom_counts(&self) -> &[u32] {
        &self.atom_counts
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// All atom rows of system `s`, flattened.
    pub fn system_rows(&self, s: usize) -> &[f32] {
        &self.data[self.offsets[s] * self.dim..self.offsets[s + 1] * self.dim]
    }

    /// Mean latent vector of system `s`, accumulated in `f64`.
    pub fn system_mean(&self, s: usize) -> Vec<f64> {
        let rows = self.system_rows(s);
        let n = self.atom_counts[s] as f64;
        let mut mean = vec![0.0f64; self.dim];
        for row in rows.chunks_exact(self.dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Same vectors, with system `s` relabelled as `ids[s]`.
    pub fn with_system_ids(&self, ids: Vec<String>) -> Result<Self, ModelError> {
        Self::new(self.dim, ids, self.atom_counts.clone(), self.data.clone())
    }
}

/// Per-frame, per-member energy predictions along one relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryEnsemble {
    system_id: String,
    frames: Vec<Vec<f64>>,
}

impl TrajectoryEnsemble {
    pub fn new(system_id: impl Into<String>, frames: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let system_id = system_id.into();
        if system_id.is_empty() {
            return Err(ModelError::EmptySystemId);
        }
        let Some(first) = frames.first() else {
            return Err(ModelError::NoFrames(system_id));
        };
        let expected = first.len();
        for (frame, members) in frames.iter().enumerate() {
            if members.len() != expected {
                return Err(ModelError::RaggedFrames {
                    id: system_id,
                    frame,
                    members: members.len(),
                    expected,
                });
            }
            if members.len() < 2 {
                return Err(ModelError::TooFewMembers { id: system_id, frame, members: members.len() });
            }
            if members.iter().any(|e| !e.is_finite()) {
                return Err(ModelError::NonFinite("trajectory energies"));
            }
        }
        Ok(Self { system_id, frames })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn n_members(&self) -> usize {
        self.frames[0].len()
    }
}

/// One bin of the error-based calibration plot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub rmv: f64,
    pub rmse: f64,
    pub count: usize,
    pub rmse_ci_lo: f64,
    pub rmse_ci_hi: f64,
}

/// Line of best fit through binned (RMV, RMSE) points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub slope: f64,
    pub intercept: f64,
    pub fit_r2: f64,
    pub parity_r2: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCI {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

impl IntervalCI {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The full validation metric suite for one uncertainty method on one split.
///
/// `spearman_rho` and `auroc` are `None` when undefined on the data (constant
/// input or a single class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub parity_r2: f64,
    pub fit_r2: f64,
    pub slope: f64,
    pub intercept: f64,
    pub nll: f64,
    pub spearman_rho: Option<f64>,
    pub auroc: Option<f64>,
    pub miscal_area: f64,
    pub var_z: f64,
    pub ci_var_z: IntervalCI,
    pub calibrated_flag: bool,
}

pub(crate) fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), ModelError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ModelError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Pairs each record with the estimate sharing its `system_id`.
///
/// Output follows record order. Fails on duplicates on either side and on
/// ids present on only one side.
pub fn join_by_id<'a>(
    records: &'a [EnergyRecord],
    estimates: &'a [UncertaintyEstimate],
) -> Result<Vec<(&'a EnergyRecord, &'a UncertaintyEstimate)>, ModelError> {
    check_unique(records.iter().map(|r| r.system_id.as_str()))
        .map_err(|e| ModelError::JoinFailure(format!("records: {e}")))?;
    let mut by_id: HashMap<&str, &UncertaintyEstimate> = HashMap::with_capacity(estimates.len());
    for est in estimates {
        if by_id.insert(est.system_id(), est).is_some() {
            return Err(ModelError::JoinFailure(format!("duplicate sigma for `{}`", est.system_id())));
        }
    }
    let mut pairs = Vec::with_capacity(records.len());
    for rec in records {
        let est = by_id
            .get(rec.system_id.as_str())
            .ok_or_else(|| ModelError::JoinFailure(format!("no sigma for `{}`", rec.system_id)))?;
        pairs.push((rec, *est));
    }
    if pairs.len() != estimates.len() {
        let known: std::collections::HashSet<&str> = records.iter().map(|r| r.system_id.as_str()).collect();
        let orphan = estimates.iter().find(|e| !known.contains(e.system_id())).map(|e| e.system_id());
        return Err(ModelError::JoinFailure(format!("no record for `{}`", orphan.unwrap_or("?"))));
    }
    Ok(pairs)
}
