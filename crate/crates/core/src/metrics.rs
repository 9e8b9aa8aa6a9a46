//! Full-reference fusion quality metrics: ERGAS, SAM and SSIM.
//!
//! ERGAS normalizes each band by the reference mean and SSIM takes its
//! dynamic range from the reference, so both are asymmetric in their
//! arguments. SAM is symmetric.

use serde::Serialize;

use crate::cube::ImageCube;
use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandMetrics {
    pub rmse: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ergas: f64,
    /// Mean spectral angle in degrees.
    pub sam: f64,
    pub ssim: f64,
    /// Pixels left out of SAM because one of the spectra had zero norm.
    pub sam_skipped: usize,
    pub per_band: Vec<BandMetrics>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "method,ergas,sam_deg,ssim";

    /// `method,ergas,sam_deg,ssim` followed by any extra config columns.
    pub fn csv_row(&self, method: &str, extra: &[String]) -> String {
        let mut row = format!("{method},{},{},{}", self.ergas, self.sam, self.ssim);
        for e in extra {
            row.push(',');
            row.push_str(e);
        }
        row
    }
}

fn check_dims(reference: &ImageCube, estimate: &ImageCube) -> Result<()> {
    if reference.dims() != estimate.dims() {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?} vs estimate {:?}",
            reference.dims(),
            estimate.dims()
        )));
    }
    if reference.bands() == 0 {
        return Err(Error::InvalidArgument(
            "metrics need at least one band".into(),
        ));
    }
    Ok(())
}

pub fn band_rmse(reference: &ImageCube, estimate: &ImageCube, band: usize) -> f64 {
    let (a, b) = (reference.band(band), estimate.band(band));
    let se: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (se / a.len() as f64).sqrt()
}

fn band_mean(cube: &ImageCube, band: usize) -> f64 {
    let b = cube.band(band);
    b.iter().sum::<f64>() / b.len() as f64
}

/// `100 · ratio · sqrt(mean_k (RMSE_k / μ_k)²)` with `ratio` the high/low
/// resolution pixel-size ratio (1/4 for a factor-4 pair).
pub fn ergas(reference: &ImageCube, estimate: &ImageCube, ratio: f64) -> Result<f64> {
    check_dims(reference, estimate)?;
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ERGAS ratio must be positive, got {ratio}"
        )));
    }
    let q = reference.bands();
    let mut acc = 0.0;
    for k in 0..q {
        let mu = band_mean(reference, k);
        if mu.abs() < 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "reference band {k} has zero mean"
            )));
        }
        let rmse = band_rmse(reference, estimate, k);
        acc += (rmse / mu) * (rmse / mu);
    }
    Ok(100.0 * ratio * (acc / q as f64).sqrt())
}

/// Mean spectral angle in degrees and the number of skipped zero-norm pixels.
pub fn sam_with_skipped(reference: &ImageCube, estimate: &ImageCube) -> Result<(f64, usize)> {
    check_dims(reference, estimate)?;
    let (q, n) = (reference.bands(), reference.pixels());
    let (ra, ea) = (reference.as_slice(), estimate.as_slice());
    let mut total = 0.0;
    let mut used = 0usize;
    for p in 0..n {
        let (mut dot, mut nr, mut ne) = (0.0, 0.0, 0.0);
        for k in 0..q {
            let (x, y) = (ra[k * n + p], ea[k * n + p]);
            dot += x * y;
            nr += x * x;
            ne += y * y;
        }
        if nr == 0.0 || ne == 0.0 {
            continue;
        }
        // sqrt(nr * ne) is exact when the spectra coincide, so identical pixels give 0
        let cos = (dot / (nr * ne).sqrt()).clamp(-1.0, 1.0);
        total += cos.acos();
        used += 1;
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "every pixel has a zero-norm spectrum".into(),
        ));
    }
    Ok((total / used as f64 * 180.0 / std::f64::consts::PI, n - used))
}

pub fn sam(reference: &ImageCube, estimate: &ImageCube) -> Result<f64> {
    sam_with_skipped(reference, estimate).map(|(s, _)| s)
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a `rows × cols` plane.
fn filter_valid(src: &[f64], rows: usize, cols: usize, g: &[f64]) -> Vec<f64> {
    let w = g.len();
    let (or, oc) = (rows - w + 1, cols - w + 1);
    let mut tmp = vec![0.0; rows * oc];
    for r in 0..rows {
        for c in 0..oc {
            tmp[r * oc + c] = (0..w).map(|k| g[k] * src[r * cols + c + k]).sum();
        }
    }
    let mut out = vec![0.0; or * oc];
    for r in 0..or {
        for c in 0..oc {
            out[r * oc + c] = (0..w).map(|k| g[k] * tmp[(r + k) * oc + c]).sum();
        }
    }
    out
}

fn ssim_band(x: &[f64], y: &[f64], rows: usize, cols: usize, c1: f64, c2: f64, g: &[f64]) -> f64 {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, rows, cols, g);
    let my = filter_valid(y, rows, cols, g);
    let sxx = filter_valid(&xx, rows, cols, g);
    let syy = filter_valid(&yy, rows, cols, g);
    let sxy = filter_valid(&xy, rows, cols, g);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        let num = (2.0 * ux * uy + c1) * (2.0 * cov + c2);
        let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
        total += num / den;
    }
    total / mx.len() as f64
}

fn ssim_per_band(reference: &ImageCube, estimate: &ImageCube) -> Result<Vec<f64>> {
    check_dims(reference, estimate)?;
    let (rows, cols, q) = reference.dims();
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {rows}x{cols}"
        )));
    }
    let data = reference.as_slice();
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = if hi > lo { hi - lo } else { 1.0 };
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let g = gaussian_window();
    Ok((0..q)
        .map(|k| ssim_band(reference.band(k), estimate.band(k), rows, cols, c1, c2, &g))
        .collect())
}

/// Band-averaged SSIM with an 11×11 Gaussian window (σ = 1.5) and stabilizers
/// derived from the reference's global dynamic range.
pub fn ssim(reference: &ImageCube, estimate: &ImageCube) -> Result<f64> {
    let per = ssim_per_band(reference, estimate)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// All three metrics plus the per-band table.
pub fn evaluate(reference: &ImageCube, estimate: &ImageCube, ratio: f64) -> Result<MetricsReport> {
    let ergas = ergas(reference, estimate, ratio)?;
    let (sam, sam_skipped) = sam_with_skipped(reference, estimate)?;
    let per_ssim = ssim_per_band(reference, estimate)?;
    let ssim = per_ssim.iter().sum::<f64>() / per_ssim.len() as f64;
    let per_band = per_ssim
        .iter()
        .enumerate()
        .map(|(k, &s)| BandMetrics {
            rmse: band_rmse(reference, estimate, k),
            ssim: s,
        })
        .collect();
    Ok(MetricsReport {
        ergas,
        sam,
        ssim,
        sam_skipped,
        per_band,
    })
}
