//! Trains the fusion network on a simulated pair, saves and reloads the
//! model, fuses, and compares against plain interpolation.
//!
//! Uses a deliberately small budget so it finishes in seconds; see the
//! `train` subcommand for the full defaults.

use hsfusion::experiment::interpolation_baseline;
use hsfusion::metrics::evaluate;
use hsfusion::resample::FilterKind;
use hsfusion::simulate::{make_wald_pair, synthetic_scene, SpectralResponse};
use hsfusion::{fit, fuse, FuseMode, TrainConfig, TrainedModel};

fn main() -> hsfusion::Result<()> {
    let reference = synthetic_scene(48, 48, 16, 3, 3)?;
    let response = SpectralResponse::block_average(3, 16)?;
    let pair = make_wald_pair(&reference, &response, 4, FilterKind::Bicubic)?;

    let cfg = TrainConfig {
        r: 2,
        n_patches: 128,
        epochs: 10,
        noise_variance: 0.002,
        seed: 1,
        ..TrainConfig::default()
    };
    let (model, pca) = fit(&pair.ms, &pair.lr_hs, &cfg)?;
    let first = model.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = model.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "loss {first:.5} -> {last:.5} over {} epochs",
        model.loss_history.len()
    );

    let path = std::env::temp_dir().join("example.hsfm");
    model.save(&path)?;
    let model = TrainedModel::load(&path)?;

    let out = fuse(&model, &pair.ms, &pair.lr_hs, &pca, FuseMode::Full)?;
    let baseline = interpolation_baseline(&pair.lr_hs, 4, FilterKind::Bicubic)?;
    let fused = evaluate(&reference, &out.fused, 0.25)?;
    let interp = evaluate(&reference, &baseline, 0.25)?;
    println!("{:<8} {:>8} {:>8} {:>8}", "", "ERGAS", "SAM", "SSIM");
    println!(
        "{:<8} {:>8.3} {:>8.3} {:>8.4}",
        "fused", fused.ergas, fused.sam, fused.ssim
    );
    println!(
        "{:<8} {:>8.3} {:>8.3} {:>8.4}",
        "bicubic", interp.ergas, interp.sam, interp.ssim
    );
    Ok(())
}
