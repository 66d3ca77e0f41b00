//! JSON documents written by `calibrate` and `evaluate`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uqbench_core::calibration::CurvePoint;
use uqbench_core::metrics::BootstrapConfig;
use uqbench_core::{CalibrationBin, CalibrationFit, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub bootstrap: BootstrapConfig,
    pub n_bins: usize,
    /// Keyed by role (`records`, `sigmas`, `fit`).
    pub inputs: BTreeMap<String, InputDigest>,
}

impl RunMetadata {
    pub fn new(bootstrap: BootstrapConfig, n_bins: usize) -> Self {
        Self { tool_version: env!("CARGO_PKG_VERSION").to_string(), bootstrap, n_bins, inputs: BTreeMap::new() }
    }

    pub fn input(mut self, role: &str, path: &Path) -> anyhow::Result<Self> {
        self.inputs.insert(role.to_string(), InputDigest::of(path)?);
        Ok(self)
    }
}

/// Output of `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub fit: CalibrationFit,
    pub bins: Vec<CalibrationBin>,
    pub metadata: RunMetadata,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub report: MetricsReport,
    pub curve: Vec<CurvePoint>,
    pub auroc_threshold: f64,
    /// Recalibration applied before evaluating, if any.
    pub applied_fit: Option<CalibrationFit>,
    /// Systems whose recalibrated sigma hit the floor.
    pub floored: Vec<String>,
    pub metadata: RunMetadata,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
