//! Synthetic datasets with known error dispersions, and brute-force oracles
//! used to cross-check the metric and estimator implementations.
//!
//! Each system gets a novelty score `s` in (0, 1]. Its true dispersion is
//! `sigma_law.slope * s + sigma_law.intercept`, its error is that dispersion
//! times a unit-variance draw from the noise family, and its query latents
//! sit `s * latent_offset` away from a training cluster. Nearest-neighbour
//! distance therefore tracks the true dispersion, with `latent_offset` as the
//! signal strength (0 removes it).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricsError;
use crate::model::{EnergyRecord, LatentMatrix, Method, ModelError, TrajectoryEnsemble, UncertaintyEstimate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("query dim {query} does not match train dim {train}")]
    DimMismatch { train: usize, query: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Unit-variance, zero-mean error shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
    /// Laplace, excess kurtosis 3.
    Laplace,
    /// Log-normal with log-scale [`SKEW_SHAPE`], shifted and scaled to zero
    /// mean and unit variance.
    Skewed,
}

/// Log-scale parameter of the skewed family (skewness about 1.75).
pub const SKEW_SHAPE: f64 = 0.5;

impl NoiseFamily {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::Laplace => {
                // inverse CDF on u in (-1/2, 1/2), scale 1/sqrt(2) for unit variance
                let u = (1.0 - rng.gen::<f64>()) - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln() * std::f64::consts::FRAC_1_SQRT_2
            }
            NoiseFamily::Skewed => {
                let s2 = SKEW_SHAPE * SKEW_SHAPE;
                let mean = (s2 / 2.0).exp();
                let sd = ((s2.exp() - 1.0) * s2.exp()).sqrt();
                let n: f64 = StandardNormal.sample(rng);
                ((SKEW_SHAPE * n).exp() - mean) / sd
            }
        }
    }
}

/// Affine map from novelty score to true dispersion (eV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaLaw {
    pub slope: f64,
    pub intercept: f64,
}

/// How the reported sigma deviates from the true dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Distortion {
    None,
    Scale { factor: f64 },
    Affine { slope: f64, intercept: f64 },
    /// Multiplicative log-normal jitter, `sigma * exp(jitter * N(0, 1))`.
    Noisy { jitter: f64 },
}

impl Distortion {
    fn apply<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> f64 {
        match self {
            Distortion::None => sigma,
            Distortion::Scale { factor } => factor * sigma,
            Distortion::Affine { slope, intercept } => slope * sigma + intercept,
            Distortion::Noisy { jitter } => {
                let n: f64 = StandardNormal.sample(rng);
                sigma * (jitter * n).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_systems: usize,
    pub n_train_systems: usize,
    /// Inclusive range of atoms per system.
    pub atoms_per_system: [u32; 2],
    pub latent_dim: usize,
    pub n_clusters: usize,
    /// Standard deviation of cluster centres.
    pub cluster_spread: f64,
    /// Per-component standard deviation of atoms around their centre.
    pub atom_jitter: f64,
    /// Distance of a novelty-1 query atom from its cluster.
    pub latent_offset: f64,
    pub noise_family: NoiseFamily,
    pub sigma_law: SigmaLaw,
    pub estimator_distortion: Distortion,
    pub n_frames: usize,
    pub n_members: usize,
    /// Share of systems written to the calibration split.
    pub calibration_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_systems: 2000,
            n_train_systems: 2000,
            atoms_per_system: [1, 4],
            latent_dim: 8,
            n_clusters: 8,
            cluster_spread: 10.0,
            atom_jitter: 0.05,
            latent_offset: 1.0,
            noise_family: NoiseFamily::Gaussian,
            sigma_law: SigmaLaw { slope: 0.3, intercept: 0.05 },
            estimator_distortion: Distortion::None,
            n_frames: 5,
            n_members: 5,
            calibration_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidConfig(msg));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if self.n_systems == 0 || self.n_train_systems == 0 {
            return bad("n_systems and n_train_systems must be >= 1".into());
        }
        if self.latent_dim == 0 || self.n_clusters == 0 {
            return bad("latent_dim and n_clusters must be >= 1".into());
        }
        let [lo, hi] = self.atoms_per_system;
        if lo == 0 || lo > hi {
            return bad(format!("atoms_per_system [{lo}, {hi}] must satisfy 1 <= min <= max"));
        }
        if !finite_nonneg(self.cluster_spread) || !finite_nonneg(self.atom_jitter) || !finite_nonneg(self.latent_offset) {
            return bad("cluster_spread, atom_jitter and latent_offset must be finite and >= 0".into());
        }
        let law = self.sigma_law;
        if !(law.slope.is_finite() && law.slope > 0.0 && finite_nonneg(law.intercept)) {
            return bad(format!(
                "sigma_law needs slope > 0 and intercept >= 0 so dispersions stay positive, got {law:?}"
            ));
        }
        match self.estimator_distortion {
            Distortion::None => {}
            Distortion::Scale { factor } if factor.is_finite() && factor > 0.0 => {}
            Distortion::Affine { slope, intercept }
                if slope.is_finite() && slope > 0.0 && intercept.is_finite() && slope * law.intercept + intercept > 0.0 => {}
            Distortion::Noisy { jitter } if finite_nonneg(jitter) => {}
            d => return bad(format!("distortion {d:?} can produce non-positive sigmas")),
        }
        if self.n_frames == 0 || self.n_members < 2 {
            return bad("need n_frames >= 1 and n_members >= 2".into());
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return bad("calibration_fraction must be in (0, 1)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub records: Vec<EnergyRecord>,
    pub true_sigmas: Vec<f64>,
    /// Distorted copies of the true dispersions, method `external`.
    pub reported: Vec<UncertaintyEstimate>,
    pub latents: LatentMatrix,
    pub train_latents: LatentMatrix,
    pub trajectories: Vec<TrajectoryEnsemble>,
}

impl SynthDataset {
    /// True dispersions as (uncalibrated) estimates.
    pub fn true_estimates(&self) -> Vec<UncertaintyEstimate> {
        self.records
            .iter()
            .zip(&self.true_sigmas)
            .map(|(r, &s)| UncertaintyEstimate::new(r.system_id.clone(), s, Method::External).expect("positive"))
            .collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(EnergyRecord::error).collect()
    }

    /// The systems at `indices` (in that order), sharing the training set.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, SynthError> {
        let dim = self.latents.dim();
        let mut ids = Vec::with_capacity(indices.len());
        let mut counts = Vec::with_capacity(indices.len());
        let mut data = Vec::new();
        for &i in indices {
            ids.push(self.latents.system_ids()[i].clone());
            counts.push(self.latents.atom_counts()[i]);
            data.extend_from_slice(self.latents.system_rows(i));
        }
        Ok(Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            true_sigmas: indices.iter().map(|&i| self.true_sigmas[i]).collect(),
            reported: indices.iter().map(|&i| self.reported[i].clone()).collect(),
            latents: LatentMatrix::new(dim, ids, counts, data)?,
            train_latents: self.train_latents.clone(),
            trajectories: indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
        })
    }
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize, sd: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect()
}

fn unit_vec<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `m` member values with exactly zero mean and unit sample variance.
fn standardized_members<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, m, 1.0);
        let mean = v.iter().sum::<f64>() / m as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
        if var > 1e-12 {
            let sd = var.sqrt();
            return v.iter().map(|x| (x - mean) / sd).collect();
        }
    }
}

/// Deterministic synthetic dataset for `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.latent_dim;
    let [atoms_lo, atoms_hi] = cfg.atoms_per_system;

    let centers: Vec<Vec<f64>> = (0..cfg.n_clusters).map(|_| gaussian_vec(&mut rng, dim, cfg.cluster_spread)).collect();

    let mut train_ids = Vec::with_capacity(cfg.n_train_systems);
    let mut train_counts = Vec::with_capacity(cfg.n_train_systems);
    let mut train_data = Vec::new();
    for i in 0..cfg.n_train_systems {
        let center = &centers[rng.gen_range(0..cfg.n_clusters)];
        let atoms = rng.gen_range(atoms_lo..=atoms_hi);
        for _ in 0..atoms {
            let jitter = gaussian_vec(&mut rng, dim, cfg.atom_jitter);
            train_data.extend(center.iter().zip(&jitter).map(|(c, j)| (c + j) as f32));
        }
        train_ids.push(format!("train-{i:06}"));
        train_counts.push(atoms);
    }

    let n = cfg.n_systems;
    let mut records = Vec::with_capacity(n);
    let mut true_sigmas = Vec::with_capacity(n);
    let mut reported = Vec::with_capacity(n);
    let mut trajectories = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    let mut data = Vec::new();
    for i in 0..n {
        let id = format!("sys-{i:06}");
        let center = &centers[rng.gen_range(0..cfg.n_clusters)];
        let atoms = rng.gen_range(atoms_lo..=atoms_hi);
        let novelty = 1.0 - rng.gen::<f64>();
        for _ in 0..atoms {
            let jitter = gaussian_vec(&mut rng, dim, cfg.atom_jitter);
            let dir = unit_vec(&mut rng, dim);
            let shift = novelty * cfg.latent_offset;
            data.extend((0..dim).map(|d| (center[d] + jitter[d] + shift * dir[d]) as f32));
        }

        let sigma = cfg.sigma_law.slope * novelty + cfg.sigma_law.intercept;
        let base: f64 = StandardNormal.sample(&mut rng);
        let e_true = -1.5 + base;
        let error = sigma * cfg.noise_family.sample(&mut rng);
        let e_pred = e_true + error;
        let reported_sigma = cfg.estimator_distortion.apply(sigma, &mut rng);

        // per-frame member spread shrinks towards the true dispersion at the last frame
        let growth: f64 = rng.gen();
        let drift: f64 = 0.5 * rng.gen::<f64>();
        let last = cfg.n_frames - 1;
        let frames: Vec<Vec<f64>> = (0..cfg.n_frames)
            .map(|f| {
                let remaining = if last == 0 { 0.0 } else { (last - f) as f64 / last as f64 };
                let scale = sigma * (1.0 + growth * remaining);
                let centre = e_pred + drift * remaining;
                standardized_members(&mut rng, cfg.n_members).into_iter().map(|z| centre + scale * z).collect()
            })
            .collect();

        records.push(EnergyRecord::new(id.clone(), e_pred, e_true)?);
        true_sigmas.push(sigma);
        reported.push(UncertaintyEstimate::new(id.clone(), reported_sigma, Method::External)?);
        trajectories.push(TrajectoryEnsemble::new(id.clone(), frames)?);
        ids.push(id);
        counts.push(atoms);
    }

    Ok(SynthDataset {
        records,
        true_sigmas,
        reported,
        latents: LatentMatrix::new(dim, ids, counts, data)?,
        train_latents: LatentMatrix::new(dim, train_ids, train_counts, train_data)?,
        trajectories,
    })
}

/// Brute-force AUROC: every (positive, negative) pair scores 1 when the
/// positive has the larger sigma and 1/2 on a tie.
pub fn oracle_auroc(abs_errors: &[f64], sigmas: &[f64], threshold: f64) -> Result<f64, SynthError> {
    if abs_errors.len() != sigmas.len() {
        return Err(MetricsError::LengthMismatch { left: abs_errors.len(), right: sigmas.len() }.into());
    }
    let mut score = 0.0;
    let mut pairs = 0u64;
    for (i, ei) in abs_errors.iter().enumerate() {
        if ei.abs() <= threshold {
            continue;
        }
        for (j, ej) in abs_errors.iter().enumerate() {
            if ej.abs() > threshold {
                continue;
            }
            pairs += 1;
            if sigmas[i] > sigmas[j] {
                score += 1.0;
            } else if sigmas[i] == sigmas[j] {
                score += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(MetricsError::SingleClass.into());
    }
    let n_pos = abs_errors.iter().filter(|e| e.abs() > threshold).count();
    Ok(score / (n_pos as f64 * (abs_errors.len() - n_pos) as f64))
}

/// Brute-force nearest distances, one per query atom row.
pub fn oracle_nearest(train: &LatentMatrix, query: &LatentMatrix) -> Result<Vec<f64>, SynthError> {
    if train.dim() != query.dim() {
        return Err(SynthError::DimMismatch { train: train.dim(), query: query.dim() });
    }
    let dim = train.dim();
    let mut out = Vec::with_capacity(query.n_rows());
    for q in 0..query.n_rows() {
        let mut best = f64::INFINITY;
        for t in 0..train.n_rows() {
            let mut acc = 0.0f64;
            for c in 0..dim {
                let d = query.data()[q * dim + c] as f64 - train.data()[t * dim + c] as f64;
                acc += d * d;
            }
            best = best.min(acc);
        }
        out.push(best.sqrt());
    }
    Ok(out)
}
