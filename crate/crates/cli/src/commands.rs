use std::path::Path;

use anyhow::{bail, Context};
use uqbench_core::calibration::{self, EvaluateOptions};
use uqbench_core::estimators::{self, DistanceIndex};
use uqbench_core::io::{self, DatasetSplit};
use uqbench_core::metrics::{BootstrapConfig, DEFAULT_GRID_N};
use uqbench_core::model::join_by_id;
use uqbench_core::synth::{self, SynthConfig, SynthDataset};
use uqbench_core::{EnergyRecord, UncertaintyEstimate};

use crate::args::*;
use crate::plot;
use crate::reports::{read_json, write_json, FitFile, ReportBundle, RunMetadata};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::IndexBuild(a) => {
            let index = index_build(&a)?;
            eprintln!("index: {} rows, {} systems, dim {}", index.row_count(), index.n_systems(), index.dim());
        }
        Command::Estimate(EstimateCommand::Distance(a)) => {
            let est = estimate_distance(&a)?;
            log::info!("wrote {} distance sigmas to {}", est.len(), a.out.display());
        }
        Command::Estimate(EstimateCommand::Ensemble(a)) => {
            let est = estimate_ensemble(&a)?;
            log::info!("wrote {} ensemble sigmas to {}", est.len(), a.out.display());
        }
        Command::Calibrate(a) => {
            let fit = calibrate(&a)?;
            eprintln!(
                "fit: slope {:.6}, intercept {:.6}, fit R2 {:.4}, parity R2 {:.4}",
                fit.fit.slope, fit.fit.intercept, fit.fit.fit_r2, fit.fit.parity_r2
            );
        }
        Command::Evaluate(a) => {
            let bundle = evaluate(&a)?;
            let r = &bundle.report;
            eprintln!(
                "Var(Z) {:.4} [{:.4}, {:.4}], calibrated: {}",
                r.var_z, r.ci_var_z.lo, r.ci_var_z.hi, r.calibrated_flag
            );
        }
        Command::Report(a) => report(&a)?,
        Command::Synth(a) => {
            let data = synth(&a)?;
            log::info!("wrote {} systems to {}", data.records.len(), a.out_dir.display());
        }
    }
    Ok(())
}

fn boot_config(a: &BootstrapArgs) -> anyhow::Result<BootstrapConfig> {
    let cfg = BootstrapConfig { n_resamples: a.resamples, level: a.level, seed: a.seed };
    cfg.validate()?;
    Ok(cfg)
}

fn load_pairs(records: &Path, sigmas: &Path) -> anyhow::Result<(Vec<EnergyRecord>, Vec<UncertaintyEstimate>)> {
    let records = io::read_records(records)?;
    let sigmas = io::read_sigmas(sigmas)?;
    Ok((records, sigmas))
}

pub fn index_build(a: &IndexBuildArgs) -> anyhow::Result<DistanceIndex> {
    let latents = io::read_latents(&a.latents)?;
    let index = DistanceIndex::build(latents)?;
    io::write_index(&a.out, &index)?;
    Ok(index)
}

pub fn estimate_distance(a: &DistanceArgs) -> anyhow::Result<Vec<UncertaintyEstimate>> {
    let index = io::read_index(&a.index)?;
    let query = io::read_latents(&a.latents)?;
    let est = estimators::distance_uncertainty(&index, &query, a.agg)?;
    io::write_sigmas(&a.out, &est)?;
    Ok(est)
}

pub fn estimate_ensemble(a: &EnsembleArgs) -> anyhow::Result<Vec<UncertaintyEstimate>> {
    let trajectories = io::read_trajectories(&a.trajectories)?;
    let est = trajectories
        .iter()
        .map(|t| estimators::ensemble_uncertainty(t, a.frame))
        .collect::<Result<Vec<_>, _>>()?;
    io::write_sigmas(&a.out, &est)?;
    Ok(est)
}

pub fn calibrate(a: &CalibrateArgs) -> anyhow::Result<FitFile> {
    let boot = boot_config(&a.boot)?;
    let (records, sigmas) = load_pairs(&a.records, &a.sigmas)?;
    let pairs = join_by_id(&records, &sigmas)?;
    if let Some((_, e)) = pairs.iter().find(|(_, e)| e.is_calibrated()) {
        bail!("sigma for `{}` is already calibrated; calibrate expects raw estimator output", e.system_id());
    }
    let errors: Vec<f64> = pairs.iter().map(|(r, _)| r.error()).collect();
    let raw: Vec<f64> = pairs.iter().map(|(_, e)| e.sigma()).collect();
    let (bins, fit) = calibration::calibrate(&errors, &raw, a.bins, &boot)?;
    let metadata = RunMetadata::new(boot, a.bins).input("records", &a.records)?.input("sigmas", &a.sigmas)?;
    let file = FitFile { fit, bins, metadata };
    write_json(&a.out, &file)?;
    Ok(file)
}

pub fn evaluate(a: &EvaluateArgs) -> anyhow::Result<ReportBundle> {
    let boot = boot_config(&a.boot)?;
    let (records, sigmas) = load_pairs(&a.records, &a.sigmas)?;
    let mut metadata = RunMetadata::new(boot, a.bins).input("records", &a.records)?.input("sigmas", &a.sigmas)?;
    let (estimates, applied_fit, floored) = match &a.fit {
        Some(path) => {
            let fit_file: FitFile = read_json(path)?;
            metadata = metadata.input("fit", path)?;
            let recal = calibration::recalibrate(&sigmas, &fit_file.fit)
                .with_context(|| format!("applying {}", path.display()))?;
            if !recal.floored.is_empty() {
                log::warn!("{} recalibrated sigmas were floored", recal.floored.len());
            }
            (recal.estimates, Some(fit_file.fit), recal.floored)
        }
        None => (sigmas, None, Vec::new()),
    };
    let opts = EvaluateOptions {
        auroc_threshold: a.auroc_threshold,
        n_bins: a.bins,
        grid_n: DEFAULT_GRID_N,
        boot,
        allow_uncalibrated: a.allow_uncalibrated,
    };
    let eval = calibration::evaluate(&records, &estimates, &opts).map_err(|e| match e {
        calibration::CalibrationError::UncalibratedInput(n) => anyhow::anyhow!(
            "{n} sigmas are uncalibrated; pass --fit from `calibrate`, or --allow-uncalibrated to evaluate them as-is"
        ),
        other => other.into(),
    })?;
    let bundle = ReportBundle {
        report: eval.report,
        curve: calibration::calibration_curve(&eval.bins),
        auroc_threshold: a.auroc_threshold,
        applied_fit,
        floored,
        metadata,
    };
    write_json(&a.out, &bundle)?;
    Ok(bundle)
}

pub fn report(a: &ReportArgs) -> anyhow::Result<()> {
    if a.plot.is_none() && a.csv.is_none() {
        bail!("nothing to do: pass --plot and/or --csv");
    }
    let bundle: ReportBundle = read_json(&a.report)?;
    if let Some(path) = &a.plot {
        let svg = plot::calibration_svg(&bundle.curve, bundle.report.slope, bundle.report.intercept);
        std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, plot::curve_csv(&bundle.curve)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Salt separating the split permutation from the data stream.
const SPLIT_SALT: u64 = 0x5b1d_c0de_5b1d_c0de;

pub fn synth(a: &SynthArgs) -> anyhow::Result<SynthDataset> {
    let cfg: SynthConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    let data = synth::generate(&cfg)?;
    let split = DatasetSplit::random(data.records.len(), cfg.calibration_fraction, cfg.seed ^ SPLIT_SALT);
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_json(&a.out_dir.join("config.json"), &cfg)?;
    io::write_latents(a.out_dir.join("train_latents.uqlt"), &data.train_latents)?;
    for (name, idx) in [("calibration", &split.calibration), ("test", &split.test)] {
        let dir = a.out_dir.join(name);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_split(&dir, &data.subset(idx)?)?;
    }
    Ok(data)
}

fn write_split(dir: &Path, part: &SynthDataset) -> anyhow::Result<()> {
    io::write_records(dir.join("records.jsonl"), &part.records)?;
    io::write_sigmas(dir.join("sigmas.jsonl"), &part.reported)?;
    io::write_sigmas(dir.join("true_sigmas.jsonl"), &part.true_estimates())?;
    io::write_latents(dir.join("latents.uqlt"), &part.latents)?;
    io::write_trajectories(dir.join("trajectories.jsonl"), &part.trajectories)?;
    Ok(())
}
