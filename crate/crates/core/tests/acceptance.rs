//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if a
//! gating criterion fails.
//!
//! Criterion 7 needs the Pavia University scene, which is not shipped. Point
//! `HSFUSION_PAVIA` at an HSC1 copy of it to run that check; it never gates.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use hsfusion::experiment::{
    run_sweep, Setting, SweepKind, SweepRow, SweepSpec, SweepTable, TrialSpec,
};
use hsfusion::metrics::{ergas, sam, ssim};
use hsfusion::net::gradcheck::check_gradients;
use hsfusion::net::{init_params, NetSpec, Tensor4};
use hsfusion::resample::FilterKind;
use hsfusion::simulate::{generate_scene, SceneParams, SpectralResponse};
use hsfusion::{pca_decompose, read_cube, reconstruct_full, FuseMode, ImageCube, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{classic_jacobi_eigenvalues, naive_gram, random_cube, rel_frobenius};

const GRAD_DRAWS: usize = 100;
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_ABS_TOL: f64 = 1e-7;
const GRAD_TIME_LIMIT_SECS: f64 = 60.0;

const PCA_CUBES: usize = 20;
const PCA_TOL: f64 = 1e-8;

const METRIC_TOL: f64 = 1e-9;

const SEEDS: usize = 3;
const FUSION_ERGAS_FACTOR: f64 = 0.8;
const FUSION_TIME_LIMIT_SECS: f64 = 300.0;
const NOISE_SNR_DB: f64 = 20.0;
const NOISE_MAX_DEGRADATION: f64 = 1.35;
const FILTER_NEAREST_SLACK: f64 = 1.2;

const PAVIA_TOL: f64 = 0.15;
const PAVIA_TARGET: (f64, f64, f64) = (1.676, 2.730, 0.988);

struct Gate {
    failed: usize,
}

impl Gate {
    fn report(&mut self, n: usize, name: &str, ok: bool, detail: String) {
        println!(
            "criterion {n} {name}: {} ({detail})",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            self.failed += 1;
        }
    }
}

fn gradient_check() -> (bool, String) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = NetSpec {
        hidden_filters: vec![4, 8],
        ..NetSpec::standard(2, 4)
    };
    let (mut checked, mut kinks, mut worst, mut failures) = (0, 0, 0.0f64, 0);
    for _ in 0..GRAD_DRAWS {
        let mut net = init_params(&mut rng, &spec).unwrap();
        for p in net.param_slices_mut() {
            p.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        let x = Tensor4::from_fn([5, 5, 6, 1], |_, _, _, _| rng.random_range(-1.0..1.0));
        let t = Tensor4::from_fn([5, 5, 1, 2], |_, _, _, _| rng.random_range(-1.0..1.0));
        let r = check_gradients(&net, &x, &t, GRAD_STEP, GRAD_REL_TOL, GRAD_ABS_TOL).unwrap();
        checked += r.checked;
        kinks += r.kinks;
        worst = worst.max(r.max_rel_err);
        failures += r.failures.len();
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = failures == 0 && checked > 0 && secs < GRAD_TIME_LIMIT_SECS;
    (ok, format!("{checked} params checked, {kinks} skipped at ReLU kinks, {failures} mismatches, max rel err {worst:.2e}, {secs:.1}s"))
}

fn pca_fidelity() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_rt, mut worst_sv) = (0.0f64, 0.0f64);
    for i in 0..PCA_CUBES {
        let (rows, cols, bands) = (
            rng.random_range(2..=16),
            rng.random_range(2..=16),
            rng.random_range(1..=12),
        );
        let cube = random_cube(rows, cols, bands, 100 + i as u64);
        let m = pca_decompose(&cube).unwrap();
        let back = reconstruct_full(
            &m.leading_loadings(bands).unwrap(),
            &m.trailing_loadings(bands).unwrap(),
            &m,
        )
        .unwrap();
        worst_rt = worst_rt.max(rel_frobenius(&cube, &back));
        let eig = classic_jacobi_eigenvalues(&naive_gram(&cube), bands);
        let top = eig[0].max(0.0).sqrt().max(f64::MIN_POSITIVE);
        for (d, e) in m.singular_values().iter().zip(&eig) {
            worst_sv = worst_sv.max((d - e.max(0.0).sqrt()).abs() / top);
        }
    }
    let ok = worst_rt < PCA_TOL && worst_sv < PCA_TOL;
    (
        ok,
        format!("max round-trip error {worst_rt:.2e}, max singular value error {worst_sv:.2e}"),
    )
}

fn metric_oracles() -> (bool, String) {
    let a = random_cube(16, 16, 5, 11).map(|v| v + 2.0);
    let same = ergas(&a, &a, 0.25).unwrap() == 0.0
        && sam(&a, &a).unwrap() == 0.0
        && ssim(&a, &a).unwrap() == 1.0;
    // Each band is constant at mu_k and the estimate doubles it, so the band
    // RMSE equals the band mean: ERGAS = 100 * 1/4 * sqrt(mean(1^2)) = 25.
    let means = [1.0, 3.0, 0.5, 10.0];
    let flat = ImageCube::from_fn(6, 6, means.len(), |_, _, k| means[k]);
    let e = ergas(&flat, &flat.scale(2.0), 0.25).unwrap();
    let x = ImageCube::from_fn(3, 3, 2, |_, _, k| if k == 0 { 1.0 } else { 0.0 });
    let y = ImageCube::from_fn(3, 3, 2, |_, _, k| if k == 1 { 2.0 } else { 0.0 });
    let s = sam(&x, &y).unwrap();
    let ok = same && (e - 25.0).abs() <= METRIC_TOL && (s - 90.0).abs() <= METRIC_TOL;
    (
        ok,
        format!("identity exact: {same}, constructed ERGAS {e}, orthogonal SAM {s}"),
    )
}

/// The scaled-down fusion setup shared by criteria 4 to 6.
///
/// The 16×16 low-resolution image holds only 100 distinct 7×7 patch
/// positions, so training uses 256 patches rather than 8192. With inputs
/// normalized to unit peak, the default noise variance of 0.5 swamps the
/// hidden activations at this budget and the net underfits. 0.002 keeps the
/// noise layers active as a light regularizer. The third endmember is weak so
/// that r = 2 components carry nearly all of the scene's energy.
fn fusion_base() -> (ImageCube, SpectralResponse, TrialSpec) {
    let scene = SceneParams {
        weights: vec![1.0, 0.5, 0.01],
        ..SceneParams::new(64, 64, 16, 3, 0)
    };
    let reference = generate_scene(&scene).unwrap();
    let response = SpectralResponse::block_average(3, 16).unwrap();
    let config = TrainConfig {
        r: 2,
        epochs: 20,
        n_patches: 256,
        noise_variance: 0.002,
        scale_factor: 4,
        filter: FilterKind::Bicubic,
        seed: 0,
        ..TrainConfig::default()
    };
    (
        reference,
        response,
        TrialSpec {
            config,
            snr_db: None,
            mode: FuseMode::Full,
        },
    )
}

struct FusionRun {
    noiseless: SweepTable,
    noisy: SweepTable,
    filters: SweepTable,
    noiseless_secs: f64,
}

impl FusionRun {
    fn csvs(&self) -> [String; 3] {
        [
            self.noiseless.to_csv(),
            self.noisy.to_csv(),
            self.filters.to_csv(),
        ]
    }
}

fn fusion_run() -> FusionRun {
    let (reference, response, base) = fusion_base();
    let log = |r: &SweepRow| {
        eprintln!(
            "  {} seed {}: fused ERGAS {:.4}, baseline {:.4}",
            r.setting, r.outcome.seed, r.outcome.fused.ergas, r.outcome.baseline.ergas
        )
    };
    let start = Instant::now();
    let spec = SweepSpec {
        settings: vec![Setting::Filter(FilterKind::Bicubic)],
        trials: SEEDS,
        base: base.clone(),
    };
    let noiseless = run_sweep(&reference, &response, SweepKind::Filter, &spec, log).unwrap();
    let noiseless_secs = start.elapsed().as_secs_f64();

    let noisy_base = TrialSpec {
        mode: FuseMode::Reduced,
        ..base.clone()
    };
    let spec = SweepSpec {
        settings: vec![Setting::Snr(NOISE_SNR_DB)],
        trials: SEEDS,
        base: noisy_base,
    };
    let noisy = run_sweep(&reference, &response, SweepKind::Snr, &spec, log).unwrap();

    // The bicubic arm is exactly the noiseless run above.
    let others = vec![
        Setting::Filter(FilterKind::Bilinear),
        Setting::Filter(FilterKind::Nearest),
    ];
    let spec = SweepSpec {
        settings: others,
        trials: SEEDS,
        base,
    };
    let rest = run_sweep(&reference, &response, SweepKind::Filter, &spec, log).unwrap();
    let filters = SweepTable {
        kind: SweepKind::Filter,
        rows: noiseless.rows.iter().chain(&rest.rows).cloned().collect(),
    };
    FusionRun {
        noiseless,
        noisy,
        filters,
        noiseless_secs,
    }
}

fn fusion_beats_interpolation(run: &FusionRun) -> (bool, String) {
    let mut ok = run.noiseless_secs < FUSION_TIME_LIMIT_SECS;
    let mut parts = Vec::new();
    for r in &run.noiseless.rows {
        let (f, b) = (&r.outcome.fused, &r.outcome.baseline);
        ok &= f.ergas < FUSION_ERGAS_FACTOR * b.ergas && f.sam < b.sam;
        parts.push(format!(
            "seed {}: ERGAS {:.3} vs {:.3}, SAM {:.3} vs {:.3}",
            r.outcome.seed, f.ergas, b.ergas, f.sam, b.sam
        ));
    }
    parts.push(format!("{:.0}s", run.noiseless_secs));
    (ok, parts.join("; "))
}

fn noise_robustness(run: &FusionRun) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (clean, noisy) in run.noiseless.rows.iter().zip(&run.noisy.rows) {
        let (c, n, b) = (
            clean.outcome.fused.ergas,
            noisy.outcome.fused.ergas,
            noisy.outcome.baseline.ergas,
        );
        ok &= n < NOISE_MAX_DEGRADATION * c && n < b;
        parts.push(format!(
            "seed {}: ERGAS {n:.3} ({:+.0}% vs {c:.3}), noisy baseline {b:.3}",
            noisy.outcome.seed,
            100.0 * (n / c - 1.0)
        ));
    }
    (ok, parts.join("; "))
}

fn filter_sensitivity(run: &FusionRun) -> (bool, String) {
    let means = run.filters.mean_ergas();
    let find = |k: FilterKind| {
        *means
            .iter()
            .find(|(s, ..)| *s == Setting::Filter(k))
            .unwrap()
    };
    let (_, cubic, cubic_b) = find(FilterKind::Bicubic);
    let (_, linear, _) = find(FilterKind::Bilinear);
    let (_, nearest, nearest_b) = find(FilterKind::Nearest);
    let (fused_factor, base_factor) = (nearest / cubic, nearest_b / cubic_b);
    let ok =
        cubic <= linear && linear <= FILTER_NEAREST_SLACK * nearest && fused_factor < base_factor;
    (
        ok,
        format!(
            "mean ERGAS bicubic {cubic:.3}, bilinear {linear:.3}, nearest {nearest:.3}; nearest/bicubic fused x{fused_factor:.3}, baseline x{base_factor:.3}"
        ),
    )
}

fn pavia(path: PathBuf) -> (bool, String) {
    let reference = match read_cube(&path) {
        Ok(c) => c,
        Err(e) => return (false, format!("cannot read {}: {e}", path.display())),
    };
    let response = SpectralResponse::rgbn_default(reference.bands()).unwrap();
    let (mut e, mut s, mut q) = (0.0, 0.0, 0.0);
    for seed in 0..SEEDS as u64 {
        let spec = TrialSpec {
            config: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            snr_db: None,
            mode: FuseMode::Full,
        };
        let out = hsfusion::experiment::run_trial(&reference, &response, &spec).unwrap();
        e += out.fused.ergas / SEEDS as f64;
        s += out.fused.sam / SEEDS as f64;
        q += out.fused.ssim / SEEDS as f64;
    }
    let (te, ts, tq) = PAVIA_TARGET;
    let near = |v: f64, t: f64| (v - t).abs() <= PAVIA_TOL * t;
    (
        near(e, te) && near(s, ts) && near(q, tq),
        format!("mean ERGAS {e:.3}, SAM {s:.3}, SSIM {q:.4}"),
    )
}

fn main() {
    let mut gate = Gate { failed: 0 };
    let (ok, d) = gradient_check();
    gate.report(1, "gradient correctness", ok, d);
    let (ok, d) = pca_fidelity();
    gate.report(2, "PCA fidelity", ok, d);
    let (ok, d) = metric_oracles();
    gate.report(3, "metric oracles", ok, d);

    let first = fusion_run();
    let (ok, d) = fusion_beats_interpolation(&first);
    gate.report(4, "fusion beats interpolation", ok, d);
    let (ok, d) = noise_robustness(&first);
    gate.report(5, "noise robustness", ok, d);
    let (ok, d) = filter_sensitivity(&first);
    gate.report(6, "filter sensitivity", ok, d);

    match std::env::var_os("HSFUSION_PAVIA") {
        Some(path) => {
            let (ok, d) = pavia(PathBuf::from(path));
            println!(
                "criterion 7 Pavia reproduction (optional, not gating): {} ({d})",
                if ok { "PASS" } else { "FAIL" }
            );
        }
        None => println!(
            "criterion 7 Pavia reproduction (optional, not gating): SKIP (HSFUSION_PAVIA not set)"
        ),
    }

    let second = fusion_run();
    let identical = first.csvs() == second.csvs();
    let bytes: usize = first.csvs().iter().map(String::len).sum();
    gate.report(
        8,
        "determinism",
        identical,
        format!("{bytes} CSV bytes compared across two runs"),
    );

    if gate.failed > 0 {
        println!("{} criteria failed", gate.failed);
        std::process::exit(1);
    }
}
