//! ERGAS, SAM and SSIM on a few hand-built estimates.

use hsfusion::metrics::evaluate;
use hsfusion::simulate::synthetic_scene;
use hsfusion::ImageCube;

fn main() -> hsfusion::Result<()> {
    let reference = synthetic_scene(32, 32, 8, 2, 0)?;
    let (rows, cols, bands) = reference.dims();
    let estimates = [
        ("identical", reference.clone()),
        ("gain 1.1", reference.scale(1.1)),
        ("offset", reference.map(|v| v + 0.05)),
        (
            "band tilt",
            ImageCube::from_fn(rows, cols, bands, |r, c, k| {
                reference.get(r, c, k) * (1.0 + 0.03 * k as f64)
            }),
        ),
    ];
    println!(
        "{:<10} {:>8} {:>8} {:>8}",
        "estimate", "ERGAS", "SAM", "SSIM"
    );
    for (name, est) in &estimates {
        let m = evaluate(&reference, est, 0.25)?;
        println!("{name:<10} {:>8.4} {:>8.4} {:>8.4}", m.ergas, m.sam, m.ssim);
    }
    Ok(())
}
