//! Band-wise spatial resampling: anti-aliased decimation and interpolation.
//!
//! Pixel centers are aligned: target index `t` maps to source coordinate
//! `s = (t + 0.5) / scale - 0.5`. Samples outside the image are clamped to the
//! nearest edge. For decimation the kernel is stretched by the factor so it
//! acts as the anti-alias filter; nearest-neighbour is always point sampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cube::ImageCube;
use crate::error::{Error, Result};

/// Keys cubic convolution constant.
pub const BICUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Bicubic,
    Bilinear,
    Nearest,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [
        FilterKind::Bicubic,
        FilterKind::Bilinear,
        FilterKind::Nearest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Bicubic => "bicubic",
            FilterKind::Bilinear => "bilinear",
            FilterKind::Nearest => "nearest",
        }
    }

    fn radius(self) -> f64 {
        match self {
            FilterKind::Bicubic => 2.0,
            FilterKind::Bilinear => 1.0,
            FilterKind::Nearest => 0.5,
        }
    }

    /// Continuous kernel value at offset `x` (in source pixels).
    pub fn weight(self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            FilterKind::Bicubic => {
                let a = BICUBIC_A;
                if x <= 1.0 {
                    ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
                } else {
                    0.0
                }
            }
            FilterKind::Bilinear => (1.0 - x).max(0.0),
            FilterKind::Nearest => {
                if x < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bicubic" => Ok(FilterKind::Bicubic),
            "bilinear" => Ok(FilterKind::Bilinear),
            "nearest" => Ok(FilterKind::Nearest),
            other => Err(Error::Parse {
                what: "filter",
                msg: format!("unknown filter {other:?}"),
            }),
        }
    }
}

/// Per-target-sample list of `(source index, weight)` for one axis.
struct AxisWeights {
    taps: Vec<Vec<(usize, f64)>>,
}

impl AxisWeights {
    fn new(in_len: usize, out_len: usize, filter: FilterKind) -> Self {
        let scale = out_len as f64 / in_len as f64;
        let last = in_len as isize - 1;
        let clamp = |j: isize| j.clamp(0, last) as usize;
        let taps = (0..out_len)
            .map(|t| {
                let s = (t as f64 + 0.5) / scale - 0.5;
                if filter == FilterKind::Nearest {
                    return vec![(clamp((s + 0.5).floor() as isize), 1.0)];
                }
                let stretch = (1.0 / scale).max(1.0);
                let radius = filter.radius() * stretch;
                let lo = (s - radius).ceil() as isize;
                let hi = (s + radius).floor() as isize;
                let mut taps: Vec<(usize, f64)> = Vec::new();
                for j in lo..=hi {
                    let w = filter.weight((j as f64 - s) / stretch);
                    if w == 0.0 {
                        continue;
                    }
                    let idx = clamp(j);
                    match taps.iter_mut().find(|(i, _)| *i == idx) {
                        Some(tap) => tap.1 += w,
                        None => taps.push((idx, w)),
                    }
                }
                let total: f64 = taps.iter().map(|t| t.1).sum();
                for tap in &mut taps {
                    tap.1 /= total;
                }
                taps
            })
            .collect();
        Self { taps }
    }
}

fn resample(cube: &ImageCube, out_rows: usize, out_cols: usize, filter: FilterKind) -> ImageCube {
    let (rows, cols) = (cube.rows(), cube.cols());
    let wr = AxisWeights::new(rows, out_rows, filter);
    let wc = AxisWeights::new(cols, out_cols, filter);
    let mut out = ImageCube::zeros(out_rows, out_cols, cube.bands());
    let mut tmp = vec![0.0; rows * out_cols];
    for b in 0..cube.bands() {
        let src = cube.band(b);
        for r in 0..rows {
            let row = &src[r * cols..(r + 1) * cols];
            for (c, taps) in wc.taps.iter().enumerate() {
                tmp[r * out_cols + c] = taps.iter().map(|&(j, w)| w * row[j]).sum();
            }
        }
        let dst = out.band_mut(b);
        for (r, taps) in wr.taps.iter().enumerate() {
            for c in 0..out_cols {
                dst[r * out_cols + c] = taps.iter().map(|&(i, w)| w * tmp[i * out_cols + c]).sum();
            }
        }
    }
    out
}

/// Low-pass filters and downsamples every band by an integer factor.
pub fn decimate(cube: &ImageCube, factor: usize, filter: FilterKind) -> Result<ImageCube> {
    if factor < 1 {
        return Err(Error::InvalidArgument(
            "decimation factor must be >= 1".into(),
        ));
    }
    if !cube.rows().is_multiple_of(factor) || !cube.cols().is_multiple_of(factor) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} is not divisible by {factor}",
            cube.rows(),
            cube.cols()
        )));
    }
    if factor == 1 {
        return Ok(cube.clone());
    }
    Ok(resample(
        cube,
        cube.rows() / factor,
        cube.cols() / factor,
        filter,
    ))
}

/// Upsamples every band by an integer factor.
pub fn interpolate(cube: &ImageCube, factor: usize, filter: FilterKind) -> Result<ImageCube> {
    if factor < 1 {
        return Err(Error::InvalidArgument(
            "interpolation factor must be >= 1".into(),
        ));
    }
    if factor == 1 {
        return Ok(cube.clone());
    }
    Ok(resample(
        cube,
        cube.rows() * factor,
        cube.cols() * factor,
        filter,
    ))
}
