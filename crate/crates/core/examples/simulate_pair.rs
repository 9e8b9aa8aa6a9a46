//! Builds a synthetic reference scene and the simulated observation pair:
//! a full-resolution MS image and a 4x decimated, noisy HS image.
//!
//!     cargo run --example simulate_pair

use hsfusion::resample::FilterKind;
use hsfusion::simulate::{add_noise, make_wald_pair, synthetic_scene, SpectralResponse};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> hsfusion::Result<()> {
    let reference = synthetic_scene(64, 64, 32, 4, 1)?;
    let response = SpectralResponse::rgbn_default(reference.bands())?;
    let pair = make_wald_pair(&reference, &response, 4, FilterKind::Bicubic)?;
    let noisy = add_noise(&pair.lr_hs, 25.0, &mut ChaCha8Rng::seed_from_u64(9))?;

    println!("reference {:?}", reference.dims());
    println!("ms        {:?}", pair.ms.dims());
    println!("lr hs     {:?}", pair.lr_hs.dims());
    let rms = (noisy.sq_distance(&pair.lr_hs) / noisy.as_slice().len() as f64).sqrt();
    println!("noise rms at 25 dB: {rms:.4}");

    let dir = std::env::temp_dir();
    hsfusion::write_cube(&pair.ms, dir.join("ms.hsc"))?;
    hsfusion::write_cube(&noisy, dir.join("lr_hs.hsc"))?;
    println!("wrote ms.hsc and lr_hs.hsc to {}", dir.display());
    Ok(())
}
