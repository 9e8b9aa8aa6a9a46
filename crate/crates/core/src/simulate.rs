//! Experimental inputs: MS simulation from an HS reference, reduced-resolution
//! pairs, SNR-controlled noise, and a seeded synthetic scene generator.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::ImageCube;
use crate::error::{Error, Result};
use crate::gemm::{gemm, View};
use crate::resample::{decimate, FilterKind};

/// Band-averaging weights: one row per MS band over the HS bands, each row
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResponse {
    ms_bands: usize,
    hs_bands: usize,
    weights: Vec<f64>,
}

impl SpectralResponse {
    /// Validates and row-normalizes a `ms_bands × hs_bands` weight matrix.
    pub fn new(ms_bands: usize, hs_bands: usize, mut weights: Vec<f64>) -> Result<Self> {
        if ms_bands == 0 || hs_bands == 0 || weights.len() != ms_bands * hs_bands {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a {ms_bands}x{hs_bands} response",
                weights.len()
            )));
        }
        for (p, row) in weights.chunks_exact_mut(hs_bands).enumerate() {
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "response row {p} has a negative weight"
                )));
            }
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "response row {p} has no positive weight"
                )));
            }
            row.iter_mut().for_each(|w| *w /= s);
        }
        Ok(Self {
            ms_bands,
            hs_bands,
            weights,
        })
    }

    /// `ms_bands` contiguous, nearly equal blocks of the HS bands.
    pub fn block_average(ms_bands: usize, hs_bands: usize) -> Result<Self> {
        if ms_bands == 0 || ms_bands > hs_bands {
            return Err(Error::InvalidArgument(format!(
                "cannot split {hs_bands} bands into {ms_bands} blocks"
            )));
        }
        let mut w = vec![0.0; ms_bands * hs_bands];
        for k in 0..hs_bands {
            let p = k * ms_bands / hs_bands;
            w[p * hs_bands + k] = 1.0;
        }
        Self::new(ms_bands, hs_bands, w)
    }

    /// Default 4-band R, G, B, NIR response for a sensor whose `hs_bands`
    /// bands are spread evenly over 430–860 nm. Each MS band averages the HS
    /// bands falling inside its pass band (B 445–516, G 506–595, R 632–698,
    /// NIR 757–853 nm); an empty pass band falls back to the closest HS band.
    pub fn rgbn_default(hs_bands: usize) -> Result<Self> {
        const PASS: [(f64, f64); 4] = [
            (632.0, 698.0),
            (506.0, 595.0),
            (445.0, 516.0),
            (757.0, 853.0),
        ];
        if hs_bands == 0 {
            return Err(Error::InvalidArgument("no HS bands".into()));
        }
        let wavelength = |k: usize| {
            if hs_bands == 1 {
                645.0
            } else {
                430.0 + 430.0 * k as f64 / (hs_bands - 1) as f64
            }
        };
        let mut w = vec![0.0; 4 * hs_bands];
        for (p, &(lo, hi)) in PASS.iter().enumerate() {
            let row = &mut w[p * hs_bands..(p + 1) * hs_bands];
            for (k, x) in row.iter_mut().enumerate() {
                let l = wavelength(k);
                if l >= lo && l <= hi {
                    *x = 1.0;
                }
            }
            if row.iter().all(|&x| x == 0.0) {
                let mid = 0.5 * (lo + hi);
                let k = (0..hs_bands)
                    .min_by(|&a, &b| {
                        (wavelength(a) - mid)
                            .abs()
                            .total_cmp(&(wavelength(b) - mid).abs())
                    })
                    .unwrap();
                row[k] = 1.0;
            }
        }
        Self::new(4, hs_bands, w)
    }

    /// Parses `ms_bands` lines of comma-separated weights; blank lines and
    /// `#` comments are ignored.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| Error::Parse {
                        what: "response CSV",
                        msg: format!("line {}: {e}", n + 1),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let q = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || rows.iter().any(|r| r.len() != q) {
            return Err(Error::Parse {
                what: "response CSV",
                msg: "rows must be non-empty and equally long".into(),
            });
        }
        Self::new(rows.len(), q, rows.concat())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.weights.chunks_exact(self.hs_bands) {
            let fields: Vec<String> = row.iter().map(|w| w.to_string()).collect();
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    pub fn ms_bands(&self) -> usize {
        self.ms_bands
    }

    pub fn hs_bands(&self) -> usize {
        self.hs_bands
    }

    pub fn weight(&self, ms_band: usize, hs_band: usize) -> f64 {
        self.weights[ms_band * self.hs_bands + hs_band]
    }
}

/// MS image whose band `p` is `Σ_k W[p,k] · hs[k]`.
pub fn simulate_ms(hs: &ImageCube, response: &SpectralResponse) -> Result<ImageCube> {
    if hs.bands() != response.hs_bands {
        return Err(Error::DimensionMismatch(format!(
            "response expects {} HS bands, cube has {}",
            response.hs_bands,
            hs.bands()
        )));
    }
    let (p, q, n) = (response.ms_bands, response.hs_bands, hs.pixels());
    let mut out = vec![0.0; p * n];
    gemm(
        1.0,
        &response.weights,
        View::row_major(p, q),
        hs.as_slice(),
        View::row_major(q, n),
        0.0,
        &mut out,
        View::row_major(p, n),
    );
    ImageCube::new(hs.rows(), hs.cols(), p, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldPair {
    /// Full-resolution simulated MS image.
    pub ms: ImageCube,
    /// Reference decimated by the resolution factor.
    pub lr_hs: ImageCube,
}

/// Simulates the observed pair from a reference HS image, which then serves
/// as ground truth.
pub fn make_wald_pair(
    reference: &ImageCube,
    response: &SpectralResponse,
    factor: usize,
    filter: FilterKind,
) -> Result<WaldPair> {
    let lr_hs = decimate(reference, factor, filter)?;
    let ms = simulate_ms(reference, response)?;
    Ok(WaldPair { ms, lr_hs })
}

/// Adds i.i.d. Gaussian noise with `σ² = mean(x²) / 10^(snr_db / 10)`.
/// `snr_db = +∞` returns the cube unchanged.
pub fn add_noise<R: Rng + ?Sized>(cube: &ImageCube, snr_db: f64, rng: &mut R) -> Result<ImageCube> {
    if snr_db == f64::INFINITY {
        return Ok(cube.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR {snr_db} dB")));
    }
    let power = cube.sq_norm() / cube.as_slice().len().max(1) as f64;
    if power == 0.0 {
        return Err(Error::InvalidArgument(
            "SNR is undefined for an all-zero cube".into(),
        ));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let data = cube
        .as_slice()
        .iter()
        .map(|&v| v + normal.sample(rng))
        .collect();
    ImageCube::new(cube.rows(), cube.cols(), cube.bands(), data)
}

/// Parameters of [`generate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    /// Abundance scale of each endmember; the length is the spectral rank.
    pub weights: Vec<f64>,
    /// Image area per sharp-edged shape, per endmember.
    pub pixels_per_shape: usize,
    /// Largest shape radius relative to the shorter image side.
    pub max_shape_radius: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Endmember `j` weighted by `0.5^j`.
    pub fn new(rows: usize, cols: usize, bands: usize, rank: usize, seed: u64) -> Self {
        Self {
            rows,
            cols,
            bands,
            weights: (0..rank).map(|j| 0.5f64.powi(j as i32)).collect(),
            pixels_per_shape: 32,
            max_shape_radius: 1.0 / 12.0,
            seed,
        }
    }
}

/// Seeded synthetic reference scene of exact spectral rank `rank`, with the
/// default [`SceneParams`].
pub fn synthetic_scene(
    rows: usize,
    cols: usize,
    bands: usize,
    rank: usize,
    seed: u64,
) -> Result<ImageCube> {
    generate_scene(&SceneParams::new(rows, cols, bands, rank, seed))
}

/// Linear mixture of `weights.len()` endmembers.
///
/// Each endmember has a smooth positive spectrum; its abundance map mixes a
/// smooth background with sharp-edged rectangles and disks, giving detail
/// that interpolation cannot recover.
pub fn generate_scene(p: &SceneParams) -> Result<ImageCube> {
    let (rows, cols, bands, rank) = (p.rows, p.cols, p.bands, p.weights.len());
    if rank == 0 || rank > bands || rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic scene {rows}x{cols}x{bands} of rank {rank}"
        )));
    }
    if p.weights.iter().any(|w| !(w.is_finite() && *w > 0.0))
        || p.pixels_per_shape == 0
        || !(p.max_shape_radius > 0.0)
    {
        return Err(Error::InvalidArgument(
            "scene weights and shape settings must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let spectra: Vec<Vec<f64>> = (0..rank)
        .map(|j| {
            let center = (j as f64 + 0.5) / rank as f64 + rng.random_range(-0.1..0.1);
            let width = rng.random_range(0.15..0.35);
            let base = rng.random_range(0.1..0.3);
            (0..bands)
                .map(|b| {
                    let x = if bands > 1 {
                        b as f64 / (bands - 1) as f64
                    } else {
                        0.5
                    };
                    base + (-((x - center) / width).powi(2)).exp()
                })
                .collect()
        })
        .collect();

    let shapes = (rows * cols / p.pixels_per_shape).clamp(4, 400);
    let max_radius = (rows.min(cols) as f64 * p.max_shape_radius).max(2.0);
    let mut abundance = vec![vec![0.0; rows * cols]; rank];
    for (map, &weight) in abundance.iter_mut().zip(&p.weights) {
        let fx = rng.random_range(0.5..2.0) * std::f64::consts::TAU / cols as f64;
        let fy = rng.random_range(0.5..2.0) * std::f64::consts::TAU / rows as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for r in 0..rows {
            for c in 0..cols {
                map[r * cols + c] = 0.5 + 0.25 * (fx * c as f64 + fy * r as f64 + phase).sin();
            }
        }
        for _ in 0..shapes {
            let amp = rng.random_range(-0.4..0.6);
            let (cr, cc) = (
                rng.random_range(0.0..rows as f64),
                rng.random_range(0.0..cols as f64),
            );
            let size = rng.random_range(1.0..max_radius);
            let disk = rng.random_bool(0.5);
            for r in 0..rows {
                for c in 0..cols {
                    let (dr, dc) = (r as f64 - cr, c as f64 - cc);
                    let inside = if disk {
                        dr * dr + dc * dc <= size * size
                    } else {
                        dr.abs() <= size && dc.abs() <= 0.6 * size
                    };
                    if inside {
                        map[r * cols + c] += amp;
                    }
                }
            }
        }
        for v in map.iter_mut() {
            *v = weight * v.max(0.05);
        }
    }

    Ok(ImageCube::from_fn(rows, cols, bands, |r, c, b| {
        (0..rank)
            .map(|j| abundance[j][r * cols + c] * spectra[j][b])
            .sum()
    }))
}
