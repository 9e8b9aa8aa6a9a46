//! Sweeps the decimation filter over a couple of seeds and prints the sweep
//! CSV, including the per-setting mean and std rows.

use hsfusion::experiment::{parse_settings, run_sweep, SweepKind, SweepSpec, TrialSpec};
use hsfusion::simulate::{synthetic_scene, SpectralResponse};
use hsfusion::{FuseMode, TrainConfig};

fn main() -> hsfusion::Result<()> {
    let reference = synthetic_scene(48, 48, 16, 3, 3)?;
    let response = SpectralResponse::block_average(3, 16)?;
    let base = TrialSpec {
        config: TrainConfig {
            r: 2,
            n_patches: 128,
            epochs: 10,
            noise_variance: 0.002,
            ..TrainConfig::default()
        },
        snr_db: None,
        mode: FuseMode::Full,
    };
    let spec = SweepSpec {
        settings: parse_settings(SweepKind::Filter, "bicubic,bilinear,nearest")?,
        trials: 2,
        base,
    };
    let table = run_sweep(&reference, &response, SweepKind::Filter, &spec, |row| {
        eprintln!(
            "{} trial {}: ERGAS {:.3}",
            row.setting, row.trial, row.outcome.fused.ergas
        );
    })?;
    print!("{}", table.to_csv());
    Ok(())
}
