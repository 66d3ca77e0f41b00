//! End-to-end acceptance criteria. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; exits nonzero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;
use uqbench_cli::args::*;
use uqbench_cli::commands;
use uqbench_core::estimators::{
    distance_uncertainty, ensemble_uncertainty, nearest_distances, AggregationMode, DistanceIndex, FrameStrategy,
};
use uqbench_core::io::{self, FormatError};
use uqbench_core::metrics::{auroc, ci_var_z_test, miscalibration_area, nll, spearman, BootstrapConfig};
use uqbench_core::synth::{self, Distortion, NoiseFamily, SynthConfig};
use uqbench_core::{LatentMatrix, TrajectoryEnsemble};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "analytic metric checks", budget: Duration::from_secs(1), run: analytic_metrics },
    Criterion { id: 2, name: "oracle equivalence", budget: Duration::from_secs(30), run: oracle_equivalence },
    Criterion { id: 3, name: "BCa coverage of CI(Var(Z))", budget: Duration::from_secs(60), run: bca_coverage },
    Criterion { id: 4, name: "recalibration round trip", budget: Duration::from_secs(120), run: recalibration_round_trip },
    Criterion { id: 5, name: "noise-family robustness", budget: Duration::from_secs(180), run: family_robustness },
    Criterion { id: 6, name: "estimator definitions", budget: Duration::from_secs(1), run: estimator_definitions },
    Criterion { id: 7, name: "distance pipeline beats shuffled latents", budget: Duration::from_secs(180), run: distance_pipeline },
    Criterion { id: 8, name: "file-format golden bytes", budget: Duration::from_secs(1), run: golden_formats },
    Criterion { id: 9, name: "CLI determinism across thread counts", budget: Duration::from_secs(120), run: determinism },
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} {} {}: {} [{:.1}s / {}s]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

// 1

fn analytic_metrics() -> Outcome {
    let v = nll(&[0.0], &[1.0]).map_err(|e| e.to_string())?;
    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    check((v - half_ln_2pi).abs() <= 1e-9, format!("nll(0,1) = {v}, expected {half_ln_2pi}"))?;
    check((v - 0.918_938_5).abs() <= 5e-8, format!("nll(0,1) = {v} does not round to 0.9189385"))?;

    let zeros = vec![0.0; 1000];
    let sig: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
    let area = miscalibration_area(&zeros, &sig, 100).map_err(|e| e.to_string())?;
    check((area - 0.5).abs() <= 1e-6, format!("miscalibration area with zero errors = {area}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..50 {
        let n = rng.gen_range(2..400);
        let mut x = normals(&mut rng, n);
        x.sort_by(f64::total_cmp);
        x.dedup();
        let up: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let down: Vec<f64> = x.iter().map(|v| -v * 7.0 - 1.0).collect();
        let (a, b) = (spearman(&x, &up).unwrap(), spearman(&x, &down).unwrap());
        check(a == 1.0 && b == -1.0, format!("trial {trial}: spearman {a}, {b}"))?;
    }
    Ok(format!("nll(0,1) = {v:.10}, zero-error area = {area}, spearman exact on 50 monotone pairs"))
}

// 2

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut auroc_cases = 0;
    while auroc_cases < 100 {
        let n = rng.gen_range(2..=500);
        let errs: Vec<f64> = normals(&mut rng, n).iter().map(|e| e.abs() * 0.1).collect();
        // coarse sigmas so ties occur
        let sig: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 20.0).floor() / 20.0 + 0.01).collect();
        let (Ok(fast), Ok(slow)) = (auroc(&errs, &sig, 0.1), synth::oracle_auroc(&errs, &sig, 0.1)) else {
            continue;
        };
        check(fast == slow, format!("auroc {fast} vs oracle {slow} (n = {n})"))?;
        auroc_cases += 1;
    }

    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let dim = rng.gen_range(1..=16);
        let (n_train, n_query) = (rng.gen_range(1..=100), rng.gen_range(1..=100));
        let train = random_latents(&mut rng, dim, n_train, "t");
        let query = random_latents(&mut rng, dim, n_query, "q");
        let index = DistanceIndex::build(train.clone()).map_err(|e| e.to_string())?;
        let fast: Vec<f64> = nearest_distances(&index, &query).map_err(|e| e.to_string())?.concat();
        let slow = synth::oracle_nearest(&train, &query).map_err(|e| e.to_string())?;
        check(fast.len() == slow.len(), format!("case {case}: {} vs {} rows", fast.len(), slow.len()))?;
        for (a, b) in fast.iter().zip(&slow) {
            let rel = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            let rel = if a == b { 0.0 } else { rel };
            worst = worst.max(rel);
            check(rel <= 1e-6, format!("case {case}: nearest {a} vs oracle {b}"))?;
        }
    }
    Ok(format!("100 AUROC instances bit-identical, 100 nearest-distance instances within {worst:.1e} relative"))
}

fn random_latents(rng: &mut ChaCha8Rng, dim: usize, n_systems: usize, prefix: &str) -> LatentMatrix {
    let counts: Vec<u32> = (0..n_systems).map(|_| rng.gen_range(1..=5)).collect();
    let rows: u32 = counts.iter().sum();
    let data: Vec<f32> = (0..rows as usize * dim).map(|_| rng.gen_range(-3.0f32..3.0)).collect();
    let ids = (0..n_systems).map(|i| format!("{prefix}{i}")).collect();
    LatentMatrix::new(dim, ids, counts, data).unwrap()
}

// 3

fn bca_coverage() -> Outcome {
    let trials = 500;
    let mut covered = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + t);
        let z = normals(&mut rng, 200);
        let ones = vec![1.0; 200];
        let cfg = BootstrapConfig { n_resamples: 2000, level: 0.95, seed: t };
        let test = ci_var_z_test(&z, &ones, &cfg).map_err(|e| e.to_string())?;
        covered += usize::from(test.calibrated);
    }
    let rate = covered as f64 / trials as f64;
    let detail = format!("coverage {covered}/{trials} = {:.1}%", rate * 100.0);
    check((rate - 0.95).abs() <= 0.02, format!("{detail}, outside 95% +/- 2%"))?;
    Ok(detail)
}

// 4 and 5

struct TrialResult {
    parity_r2: f64,
    calibrated: bool,
    miscal_area: f64,
}

impl TrialResult {
    fn passes(&self) -> bool {
        self.parity_r2 > 0.9 && self.calibrated
    }
}

fn boot_args(seed: u64) -> BootstrapArgs {
    BootstrapArgs { seed, resamples: 2000, level: 0.95 }
}

fn calibrate_and_evaluate(cal: &Path, cal_sigmas: &Path, test: &Path, test_sigmas: &Path, work: &Path, seed: u64) -> TrialResult {
    let fit = work.join("fit.json");
    commands::calibrate(&CalibrateArgs {
        records: cal.join("records.jsonl"),
        sigmas: cal_sigmas.to_path_buf(),
        bins: 20,
        boot: boot_args(seed),
        out: fit.clone(),
    })
    .unwrap();
    let bundle = commands::evaluate(&EvaluateArgs {
        records: test.join("records.jsonl"),
        sigmas: test_sigmas.to_path_buf(),
        fit: Some(fit),
        auroc_threshold: 0.1,
        bins: 20,
        boot: boot_args(seed),
        allow_uncalibrated: false,
        out: work.join("report.json"),
    })
    .unwrap();
    TrialResult {
        parity_r2: bundle.report.parity_r2,
        calibrated: bundle.report.calibrated_flag,
        miscal_area: bundle.report.miscal_area,
    }
}

/// Synthesises 2e4 calibration plus 2e4 test systems whose reported sigma is
/// `0.5 * true + 0.2`, then runs calibrate and evaluate through the CLI layer.
fn recalibration_trial(family: NoiseFamily, seed: u64) -> TrialResult {
    let dir = TempDir::new().unwrap();
    let cfg = SynthConfig {
        n_systems: 40_000,
        n_train_systems: 1,
        atoms_per_system: [1, 1],
        latent_dim: 1,
        n_clusters: 1,
        n_frames: 1,
        n_members: 2,
        noise_family: family,
        estimator_distortion: Distortion::Affine { slope: 0.5, intercept: 0.2 },
        calibration_fraction: 0.5,
        seed,
        ..SynthConfig::default()
    };
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let data = dir.path().join("data");
    commands::synth(&SynthArgs { config: Some(cfg_path), out_dir: data.clone() }).unwrap();
    let (cal, test) = (data.join("calibration"), data.join("test"));
    calibrate_and_evaluate(&cal, &cal.join("sigmas.jsonl"), &test, &test.join("sigmas.jsonl"), dir.path(), seed)
}

fn family_pass_rate(family: NoiseFamily, trials: u64) -> (usize, Vec<TrialResult>) {
    let results: Vec<TrialResult> = (0..trials).map(|t| recalibration_trial(family, 1000 + t)).collect();
    (results.iter().filter(|r| r.passes()).count(), results)
}

fn summarize(results: &[TrialResult]) -> String {
    let flags = results.iter().filter(|r| r.calibrated).count();
    let r2 = results.iter().filter(|r| r.parity_r2 > 0.9).count();
    format!("parity_r2 > 0.9 in {r2}, calibrated in {flags}")
}

fn recalibration_round_trip() -> Outcome {
    let (passed, results) = family_pass_rate(NoiseFamily::Gaussian, 50);
    let detail = format!("{passed}/50 trials pass ({})", summarize(&results));
    check(passed >= 45, format!("{detail}; need >= 45"))?;
    Ok(detail)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn family_robustness() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for family in [NoiseFamily::Gaussian, NoiseFamily::Laplace, NoiseFamily::Skewed] {
        let (passed, results) = family_pass_rate(family, 50);
        let area = median(results.iter().map(|r| r.miscal_area).collect());
        let area_ok = family == NoiseFamily::Gaussian || area > 0.02;
        ok &= passed >= 45 && area_ok;
        details.push(format!("{family:?}: {passed}/50 pass, median miscalibration area {area:.4}"));
    }
    let detail = details.join("; ");
    check(ok, detail.clone())?;
    Ok(detail)
}

// 6

fn estimator_definitions() -> Outcome {
    // member spreads per frame: var 1, 12, 0 (divisor m - 1)
    let traj = TrajectoryEnsemble::new("s", vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 6.0], vec![2.0, 2.0, 2.0]]).unwrap();
    let expect = [
        (FrameStrategy::First, 1.0f64),
        (FrameStrategy::Last, 0.0),
        (FrameStrategy::Mean, (13.0f64 / 3.0).sqrt()),
        (FrameStrategy::Max, 12.0f64.sqrt()),
    ];
    for (strategy, want) in expect {
        let got = ensemble_uncertainty(&traj, strategy).unwrap().sigma();
        check(got == want, format!("frame {strategy}: {got} vs {want}"))?;
    }

    // train atoms (0,0), (10,0) in one system; query atoms at distances 5, 1, 5
    let train = LatentMatrix::new(2, vec!["t".into()], vec![2], vec![0.0, 0.0, 10.0, 0.0]).unwrap();
    let query = LatentMatrix::new(2, vec!["q".into()], vec![3], vec![3.0, 4.0, 10.0, 1.0, 13.0, 4.0]).unwrap();
    let index = DistanceIndex::build(train).unwrap();
    let sigma = |mode| distance_uncertainty(&index, &query, mode).unwrap()[0].sigma();
    check(sigma(AggregationMode::AtomMean) == 11.0 / 3.0, "atom-mean")?;
    check(sigma(AggregationMode::AtomSum) == 11.0, "atom-sum")?;
    check(sigma(AggregationMode::AtomMax) == 5.0, "atom-max")?;
    // query mean (26/3, 3) against train mean (5, 0)
    let want = ((26.0f64 / 3.0 - 5.0).powi(2) + 9.0).sqrt();
    let got = sigma(AggregationMode::SystemMean);
    check((got - want).abs() <= 1e-12 * want, format!("system-mean: {got} vs {want}"))?;

    let single = TrajectoryEnsemble::new("s", vec![vec![0.3, -1.2, 0.8, 2.0]]).unwrap();
    let sigmas: Vec<f64> = [FrameStrategy::First, FrameStrategy::Last, FrameStrategy::Mean, FrameStrategy::Max]
        .iter()
        .map(|&s| ensemble_uncertainty(&single, s).unwrap().sigma())
        .collect();
    check(sigmas.iter().all(|&s| s == sigmas[0]), format!("single frame strategies differ: {sigmas:?}"))?;

    let train = LatentMatrix::new(2, vec!["a".into(), "b".into()], vec![1, 1], vec![0.0, 0.0, 4.0, 1.0]).unwrap();
    let query = LatentMatrix::new(2, vec!["x".into(), "y".into()], vec![1, 1], vec![1.0, 1.0, 3.0, 3.0]).unwrap();
    let index = DistanceIndex::build(train).unwrap();
    let per_mode: Vec<Vec<f64>> =
        [AggregationMode::AtomMean, AggregationMode::AtomSum, AggregationMode::AtomMax, AggregationMode::SystemMean]
            .iter()
            .map(|&m| distance_uncertainty(&index, &query, m).unwrap().iter().map(|e| e.sigma()).collect())
            .collect();
    check(per_mode.iter().all(|v| *v == per_mode[0]), format!("single atom modes differ: {per_mode:?}"))?;
    Ok("4 frame strategies and 4 aggregations match hand values; degenerate cases collapse".into())
}

// 7

fn distance_trial(seed: u64) -> (f64, f64) {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let cfg = SynthConfig { n_systems: 4000, n_train_systems: 2000, seed, ..SynthConfig::default() };
    let cfg_path = root.join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let data = root.join("data");
    commands::synth(&SynthArgs { config: Some(cfg_path), out_dir: data.clone() }).unwrap();
    let index = root.join("train.uqix");
    commands::index_build(&IndexBuildArgs { latents: data.join("train_latents.uqlt"), out: index.clone() }).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut run = |tag: &str, shuffle: bool| {
        let work = root.join(tag);
        fs::create_dir_all(&work).unwrap();
        let mut sigma_files = Vec::new();
        for split in ["calibration", "test"] {
            let mut latents = data.join(split).join("latents.uqlt");
            if shuffle {
                let m = io::read_latents(&latents).unwrap();
                let mut ids = m.system_ids().to_vec();
                ids.shuffle(&mut rng);
                latents = work.join(format!("{split}_shuffled.uqlt"));
                io::write_latents(&latents, &m.with_system_ids(ids).unwrap()).unwrap();
            }
            let out = work.join(format!("{split}_sigmas.jsonl"));
            commands::estimate_distance(&DistanceArgs {
                index: index.clone(),
                latents,
                agg: AggregationMode::AtomMean,
                out: out.clone(),
            })
            .unwrap();
            sigma_files.push(out);
        }
        let cal = data.join("calibration");
        let test = data.join("test");
        calibrate_and_evaluate(&cal, &sigma_files[0], &test, &sigma_files[1], &work, seed).parity_r2
    };
    (run("informative", false), run("shuffled", true))
}

fn distance_pipeline() -> Outcome {
    let trials: Vec<(f64, f64)> = (0..20).map(|t| distance_trial(500 + t)).collect();
    let wins = trials.iter().filter(|(a, b)| a - b >= 0.2).count();
    let informative = median(trials.iter().map(|t| t.0).collect());
    let shuffled = median(trials.iter().map(|t| t.1).collect());
    let detail =
        format!("{wins}/20 trials gain >= 0.2 parity R2; median informative {informative:.3}, shuffled {shuffled:.3}");
    check(wins >= 18, format!("{detail}; need >= 18"))?;
    Ok(detail)
}

// 8

#[rustfmt::skip]
const UQLT_FIXTURE: &[u8] = &[
    b'U', b'Q', b'L', b'T', 1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0,
    1, 0, b'a', 1, 0, 0, 0,
    2, 0, b'b', b'c', 2, 0, 0, 0,
    0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0,
    0, 0, 0, 0x3f, 0, 0, 0x80, 0x3e,
    0, 0, 0x40, 0x40, 0, 0, 0x80, 0x40,
];

#[rustfmt::skip]
const UQIX_TAIL: &[u8] = &[
    2, 0, 0, 0, 0, 0, 0, 0,
    0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0,
    0, 0, 0xe0, 0x3f, 0, 0, 0x08, 0x40,
];

fn fixture_matrix() -> LatentMatrix {
    LatentMatrix::new(2, vec!["a".into(), "bc".into()], vec![1, 2], vec![1.0, -2.0, 0.5, 0.25, 3.0, 4.0]).unwrap()
}

fn golden_formats() -> Outcome {
    let uqix: Vec<u8> = [&b"UQIX\x01\x00\x00\x00"[..], UQLT_FIXTURE, UQIX_TAIL].concat();

    let encoded = io::encode_latents(&fixture_matrix()).map_err(|e| e.to_string())?;
    check(encoded == UQLT_FIXTURE, "encoded latents differ from fixture")?;
    let decoded = io::decode_latents(UQLT_FIXTURE).map_err(|e| e.to_string())?;
    check(decoded == fixture_matrix(), "decoded latents differ")?;
    check(io::encode_latents(&decoded).unwrap() == UQLT_FIXTURE, "latent re-encode not bit-exact")?;

    let index = DistanceIndex::build(fixture_matrix()).map_err(|e| e.to_string())?;
    check(io::encode_index(&index).unwrap() == uqix, "encoded index differs from fixture")?;
    let back = io::decode_index(&uqix).map_err(|e| e.to_string())?;
    check(io::encode_index(&back).unwrap() == uqix, "index re-encode not bit-exact")?;

    let mut bad = UQLT_FIXTURE.to_vec();
    bad[0] = b'X';
    check(matches!(io::decode_latents(&bad), Err(FormatError::BadMagic { .. })), "corrupt latent magic")?;
    let mut bad = uqix.clone();
    bad[3] = b'Y';
    check(matches!(io::decode_index(&bad), Err(FormatError::BadMagic { .. })), "corrupt index magic")?;
    let mut bad = UQLT_FIXTURE.to_vec();
    bad[4] = 2;
    check(matches!(io::decode_latents(&bad), Err(FormatError::VersionUnsupported(2))), "bad version")?;
    for len in 0..UQLT_FIXTURE.len() {
        let r = io::decode_latents(&UQLT_FIXTURE[..len]);
        check(matches!(r, Err(FormatError::TruncatedFile { .. })), format!("latents cut at {len}: {r:?}"))?;
    }
    for len in 0..uqix.len() {
        let r = io::decode_index(&uqix[..len]);
        check(matches!(r, Err(FormatError::TruncatedFile { .. })), format!("index cut at {len}: {r:?}"))?;
    }
    Ok(format!("{}-byte UQLT and {}-byte UQIX fixtures round-trip; every truncation is typed", UQLT_FIXTURE.len(), uqix.len()))
}

// 9

fn uqbench(threads: usize, args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Process::new(env!("CARGO_BIN_EXE_uqbench"))
        .args(args)
        .current_dir(cwd)
        .env("UQBENCH_THREADS", threads.to_string())
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), format!("uqbench {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)))
}

fn tree_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let cfg = SynthConfig { n_systems: 2000, n_train_systems: 1000, seed: 9, ..SynthConfig::default() };
    fs::write(root.join("cfg.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    let runs = [1usize, 2, 8];
    // outputs of each run go to out<k>/; inputs always come from out1/ so
    // recorded input paths are identical
    for (k, &threads) in runs.iter().enumerate() {
        let o = format!("out{k}");
        fs::create_dir_all(root.join(&o)).unwrap();
        let steps: Vec<Vec<String>> = vec![
            vec!["synth", "--config", "cfg.json", "--out-dir", &format!("{o}/data")],
            vec!["index-build", "--latents", "out0/data/train_latents.uqlt", "--out", &format!("{o}/train.uqix")],
            vec!["estimate", "distance", "--index", "out0/train.uqix", "--latents", "out0/data/calibration/latents.uqlt", "--agg", "atom-max", "--out", &format!("{o}/cal_d.jsonl")],
            vec!["estimate", "distance", "--index", "out0/train.uqix", "--latents", "out0/data/test/latents.uqlt", "--agg", "system-mean", "--out", &format!("{o}/test_d.jsonl")],
            vec!["estimate", "ensemble", "--trajectories", "out0/data/test/trajectories.jsonl", "--frame", "mean", "--out", &format!("{o}/test_e.jsonl")],
            vec!["calibrate", "--records", "out0/data/calibration/records.jsonl", "--sigmas", "out0/cal_d.jsonl", "--seed", "5", "--out", &format!("{o}/fit.json")],
            vec!["evaluate", "--records", "out0/data/test/records.jsonl", "--sigmas", "out0/test_d.jsonl", "--fit", "out0/fit.json", "--seed", "5", "--out", &format!("{o}/report.json")],
            vec!["evaluate", "--records", "out0/data/test/records.jsonl", "--sigmas", "out0/test_e.jsonl", "--allow-uncalibrated", "--seed", "6", "--out", &format!("{o}/report_raw.json")],
            vec!["report", "--report", "out0/report.json", "--plot", &format!("{o}/plot.svg"), "--csv", &format!("{o}/bins.csv")],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for step in &steps {
            let args: Vec<&str> = step.iter().map(String::as_str).collect();
            uqbench(threads, &args, root)?;
        }
    }
    let reference = tree_files(&root.join("out0"));
    for (k, threads) in runs.iter().enumerate().skip(1) {
        let other = root.join(format!("out{k}"));
        check(tree_files(&other) == reference, format!("run {k} wrote a different file set"))?;
        for rel in &reference {
            let a = fs::read(root.join("out0").join(rel)).unwrap();
            let b = fs::read(other.join(rel)).unwrap();
            check(a == b, format!("{} differs between 1 and {threads} threads", rel.display()))?;
        }
    }
    Ok(format!("{} output files byte-identical across UQBENCH_THREADS = {runs:?}", reference.len()))
}
