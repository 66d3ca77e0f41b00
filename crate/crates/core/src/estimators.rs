//! Uncertainty estimators: nearest-neighbour distance in latent space and
//! ensemble variance along a relaxation trajectory.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LatentMatrix, Method, ModelError, TrajectoryEnsemble, UncertaintyEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("training latent set is empty")]
    EmptyTrainSet,
    #[error("query dim {query} does not match index dim {index}")]
    DimMismatch { index: usize, query: usize },
    #[error("trajectory `{0}` needs at least 2 ensemble members")]
    TooFewMembers(String),
    #[error("system means block does not match the training set")]
    BadSystemMeans,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exact nearest-neighbour index over every training atom row, plus the
/// per-system mean vectors used by [`AggregationMode::SystemMean`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceIndex {
    train: LatentMatrix,
    /// One row of `dim` per training system.
    system_means: Vec<f32>,
}

impl DistanceIndex {
    pub fn build(train: LatentMatrix) -> Result<Self, EstimatorError> {
        if train.n_systems() == 0 || train.n_rows() == 0 {
            return Err(EstimatorError::EmptyTrainSet);
        }
        let system_means = (0..train.n_systems())
            .flat_map(|s| train.system_mean(s).into_iter().map(|v| v as f32))
            .collect();
        Ok(Self { train, system_means })
    }

    /// Reassembles an index from persisted parts.
    pub fn from_parts(train: LatentMatrix, system_means: Vec<f32>) -> Result<Self, EstimatorError> {
        if train.n_rows() == 0 {
            return Err(EstimatorError::EmptyTrainSet);
        }
        if system_means.len() != train.n_systems() * train.dim() || system_means.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::BadSystemMeans);
        }
        Ok(Self { train, system_means })
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    pub fn row_count(&self) -> usize {
        self.train.n_rows()
    }

    pub fn n_systems(&self) -> usize {
        self.train.n_systems()
    }

    pub fn train(&self) -> &LatentMatrix {
        &self.train
    }

    pub fn system_means(&self) -> &[f32] {
        &self.system_means
    }

    fn check_dim(&self, query: &LatentMatrix) -> Result<(), EstimatorError> {
        if query.dim() != self.dim() {
            return Err(EstimatorError::DimMismatch { index: self.dim(), query: query.dim() });
        }
        Ok(())
    }

    /// Distance from `point` to the closest row of `rows` (flat, `dim` wide).
    fn min_distance(rows: &[f32], dim: usize, point: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for row in rows.chunks_exact(dim) {
            let mut d2 = 0.0f64;
            for (&a, &b) in row.iter().zip(point) {
                let d = a as f64 - b;
                d2 += d * d;
                if d2 >= best {
                    break;
                }
            }
            if d2 < best {
                best = d2;
            }
        }
        best.sqrt()
    }
}

/// For every query atom, the exact Euclidean distance to the nearest training
/// atom row. Grouped per query system, in query order.
pub fn nearest_distances(index: &DistanceIndex, query: &LatentMatrix) -> Result<Vec<Vec<f64>>, EstimatorError> {
    index.check_dim(query)?;
    let dim = index.dim();
    let rows = index.train.data();
    let flat: Vec<f64> = (0..query.n_rows())
        .into_par_iter()
        .map(|i| {
            let point: Vec<f64> = query.row(i).iter().map(|&v| v as f64).collect();
            DistanceIndex::min_distance(rows, dim, &point)
        })
        .collect();
    let mut out = Vec::with_capacity(query.n_systems());
    let mut start = 0;
    for &count in query.atom_counts() {
        let end = start + count as usize;
        out.push(flat[start..end].to_vec());
        start = end;
    }
    Ok(out)
}

/// How per-atom distances (or latents) are reduced to one value per system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationMode {
    AtomMean,
    AtomSum,
    AtomMax,
    /// Distance between the query system's mean latent and the nearest
    /// training system mean.
    SystemMean,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 4] =
        [AggregationMode::AtomMean, AggregationMode::AtomSum, AggregationMode::AtomMax, AggregationMode::SystemMean];

    pub fn name(self) -> &'static str {
        match self {
            AggregationMode::AtomMean => "atom-mean",
            AggregationMode::AtomSum => "atom-sum",
            AggregationMode::AtomMax => "atom-max",
            AggregationMode::SystemMean => "system-mean",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            format!("unknown aggregation `{s}`; expected one of atom-mean, atom-sum, atom-max, system-mean")
        })
    }
}

fn reduce_atoms(distances: &[f64], mode: AggregationMode) -> f64 {
    match mode {
        AggregationMode::AtomMean => distances.iter().sum::<f64>() / distances.len() as f64,
        AggregationMode::AtomSum => distances.iter().sum(),
        AggregationMode::AtomMax => distances.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        AggregationMode::SystemMean => unreachable!("system-mean does not reduce per-atom distances"),
    }
}

/// Latent-distance uncertainty for every query system. The values have
/// arbitrary scale and must be recalibrated before use as dispersions.
pub fn distance_uncertainty(
    index: &DistanceIndex,
    query: &LatentMatrix,
    mode: AggregationMode,
) -> Result<Vec<UncertaintyEstimate>, EstimatorError> {
    index.check_dim(query)?;
    let sigmas: Vec<f64> = match mode {
        AggregationMode::SystemMean => (0..query.n_systems())
            .into_par_iter()
            .map(|s| DistanceIndex::min_distance(&index.system_means, index.dim(), &query.system_mean(s)))
            .collect(),
        _ => nearest_distances(index, query)?.iter().map(|d| reduce_atoms(d, mode)).collect(),
    };
    query
        .system_ids()
        .iter()
        .zip(sigmas)
        .map(|(id, sigma)| Ok(UncertaintyEstimate::new(id.clone(), sigma, Method::Distance)?))
        .collect()
}

/// Which per-frame ensemble variances feed the uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameStrategy {
    First,
    Last,
    Mean,
    Max,
}

impl FrameStrategy {
    pub const ALL: [FrameStrategy; 4] = [FrameStrategy::First, FrameStrategy::Last, FrameStrategy::Mean, FrameStrategy::Max];

    pub fn name(self) -> &'static str {
        match self {
            FrameStrategy::First => "first",
            FrameStrategy::Last => "last",
            FrameStrategy::Mean => "mean",
            FrameStrategy::Max => "max",
        }
    }

    fn select(self, variances: &[f64]) -> f64 {
        match self {
            FrameStrategy::First => variances[0],
            FrameStrategy::Last => variances[variances.len() - 1],
            FrameStrategy::Mean => variances.iter().sum::<f64>() / variances.len() as f64,
            FrameStrategy::Max => variances.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl fmt::Display for FrameStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FrameStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown frame strategy `{s}`; expected one of first, last, mean, max"))
    }
}

/// Sample variance (divisor m - 1) of member energies, per frame (eV²).
pub fn ensemble_frame_variances(traj: &TrajectoryEnsemble) -> Result<Vec<f64>, EstimatorError> {
    if traj.n_members() < 2 {
        return Err(EstimatorError::TooFewMembers(traj.system_id().to_string()));
    }
    Ok(traj
        .frames()
        .iter()
        .map(|members| {
            let m = members.len() as f64;
            let mean = members.iter().sum::<f64>() / m;
            members.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (m - 1.0)
        })
        .collect())
}

/// Ensemble uncertainty: the square root of the strategy-selected frame
/// variance, so the result is a dispersion in eV.
pub fn ensemble_uncertainty(
    traj: &TrajectoryEnsemble,
    strategy: FrameStrategy,
) -> Result<UncertaintyEstimate, EstimatorError> {
    let variances = ensemble_frame_variances(traj)?;
    let sigma = strategy.select(&variances).sqrt();
    Ok(UncertaintyEstimate::new(traj.system_id(), sigma, Method::Ensemble)?)
}
