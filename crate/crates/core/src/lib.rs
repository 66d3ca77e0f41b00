//! Uncertainty quantification for machine-learned relaxed-energy predictions.
//!
//! * [`estimators`]: latent nearest-neighbour distance and ensemble variance.
//! * [`calibration`]: binned RMSE-vs-RMV calibration, line fit and linear
//!   recalibration.
//! * [`metrics`]: CI(Var(Z)) with BCa bootstrap, NLL, Spearman, AUROC,
//!   miscalibration area, error-shape summaries.
//! * [`synth`]: synthetic datasets with known dispersions, plus brute-force
//!   oracles.
//! * [`io`]: record, sigma, trajectory, latent and index file formats.

pub mod calibration;
pub mod estimators;
pub mod io;
pub mod metrics;
pub mod model;
pub mod synth;

pub use model::{
    CalibrationBin, CalibrationFit, EnergyRecord, IntervalCI, LatentMatrix, Method, MetricsReport, ModelError,
    TrajectoryEnsemble, UncertaintyEstimate,
};
