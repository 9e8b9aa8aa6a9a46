//! Spectral PCA of a low-rank scene: the spectrum, the energy kept by the
//! leading components, and exact reconstruction from all of them.

use hsfusion::simulate::synthetic_scene;
use hsfusion::{pca_decompose, reconstruct_full, reconstruct_reduced};

fn main() -> hsfusion::Result<()> {
    let cube = synthetic_scene(32, 32, 24, 3, 5)?;
    let model = pca_decompose(&cube)?;
    let d = model.singular_values();
    println!("leading singular values: {:.4?}", &d[..5]);

    let norm = cube.sq_norm();
    for r in 1..=4 {
        let approx = reconstruct_reduced(&model.leading_loadings(r)?, &model, r)?;
        println!(
            "r = {r}: relative error {:.3e}",
            (cube.sq_distance(&approx) / norm).sqrt()
        );
    }
    let r = 2;
    let back = reconstruct_full(
        &model.leading_loadings(r)?,
        &model.trailing_loadings(r)?,
        &model,
    )?;
    println!(
        "full reconstruction error {:.3e}",
        (cube.sq_distance(&back) / norm).sqrt()
    );
    Ok(())
}
