#![allow(dead_code)]

use hsfusion::ImageCube;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_cube(rows: usize, cols: usize, bands: usize, seed: u64) -> ImageCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageCube::from_fn(rows, cols, bands, |_, _, _| rng.random_range(-1.0..1.0))
}

/// Gram matrix by the textbook triple loop.
pub fn naive_gram(cube: &ImageCube) -> Vec<f64> {
    let q = cube.bands();
    let mut g = vec![0.0; q * q];
    for i in 0..q {
        for j in 0..q {
            g[i * q + j] = cube
                .band(i)
                .iter()
                .zip(cube.band(j))
                .map(|(a, b)| a * b)
                .sum();
        }
    }
    g
}

/// Classical Jacobi: always annihilates the largest off-diagonal entry.
/// Returns eigenvalues in descending order.
pub fn classic_jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut a = a.to_vec();
    let scale: f64 = a
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    for _ in 0..(50 * n * n).max(1) {
        let (mut p, mut q, mut big) = (0, 0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                if a[i * n + j].abs() > big {
                    (p, q, big) = (i, j, a[i * n + j].abs());
                }
            }
        }
        if big <= 1e-15 * scale {
            break;
        }
        let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * a[p * n + q]);
        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
        let t = if theta == 0.0 { 1.0 } else { t };
        let c = 1.0 / (t * t + 1.0).sqrt();
        let s = t * c;
        for k in 0..n {
            let (akp, akq) = (a[k * n + p], a[k * n + q]);
            a[k * n + p] = c * akp - s * akq;
            a[k * n + q] = s * akp + c * akq;
        }
        for k in 0..n {
            let (apk, aqk) = (a[p * n + k], a[q * n + k]);
            a[p * n + k] = c * apk - s * aqk;
            a[q * n + k] = s * apk + c * aqk;
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

pub fn rel_frobenius(a: &ImageCube, b: &ImageCube) -> f64 {
    (a.sq_distance(b) / a.sq_norm().max(f64::MIN_POSITIVE)).sqrt()
}
