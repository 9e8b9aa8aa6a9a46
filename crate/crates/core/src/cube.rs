//! Image cubes and the HSC1 file format.
//!
//! An [`ImageCube`] stores `rows × cols × bands` samples band-sequentially:
//! the whole of band 0 in row-major order, then band 1, and so on.
//!
//! HSC1 layout (all little-endian):
//!
//! ```text
//! 0..4    b"HSC1"
//! 4..8    rows  (u32)
//! 8..12   cols  (u32)
//! 12..16  bands (u32)
//! 16..    rows*cols*bands f32 samples, band-sequential, row-major within band
//! ```
//!
//! No trailing bytes are allowed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const HSC1_MAGIC: &[u8; 4] = b"HSC1";
pub const HSC1_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageCube {
    rows: usize,
    cols: usize,
    bands: usize,
    data: Vec<f64>,
}

impl ImageCube {
    /// Builds a cube from band-sequential samples.
    pub fn new(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "cube must have positive spatial dims, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols * bands {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {rows}x{cols}x{bands} cube",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cube data"));
        }
        Ok(Self {
            rows,
            cols,
            bands,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, bands: usize) -> Self {
        assert!(rows > 0 && cols > 0, "cube must have positive spatial dims");
        Self {
            rows,
            cols,
            bands,
            data: vec![0.0; rows * cols * bands],
        }
    }

    pub fn filled(rows: usize, cols: usize, bands: usize, value: f64) -> Self {
        assert!(value.is_finite());
        let mut c = Self::zeros(rows, cols, bands);
        c.data.fill(value);
        c
    }

    /// A 0-band cube. Only meaningful as the identity of [`stack`].
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::zeros(rows, cols, 0)
    }

    /// Builds a cube by evaluating `f(row, col, band)` for every sample.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut c = Self::zeros(rows, cols, bands);
        for b in 0..bands {
            for r in 0..rows {
                for col in 0..cols {
                    c.data[(b * rows + r) * cols + col] = f(r, col, b);
                }
            }
        }
        debug_assert!(c.data.iter().all(|v| v.is_finite()));
        c
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols * bands);
        Self {
            rows,
            cols,
            bands,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Number of pixels per band.
    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.bands)
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[(band * self.rows + row) * self.cols + col]
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    pub(crate) fn band_mut(&mut self, band: usize) -> &mut [f64] {
        let n = self.pixels();
        &mut self.data[band * n..(band + 1) * n]
    }

    /// Spectrum of one pixel.
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.bands).map(|b| self.get(row, col, b)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_spatial(&self, other: &ImageCube) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageCube {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { data, ..*self }
    }

    pub fn scale(&self, factor: f64) -> ImageCube {
        self.map(|v| v * factor)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Squared Frobenius norm of the difference to `other`.
    pub fn sq_distance(&self, other: &ImageCube) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Extracts the spatial window `[row, row+h) × [col, col+w)` over all bands.
    pub fn window(&self, row: usize, col: usize, h: usize, w: usize) -> Result<ImageCube> {
        if row + h > self.rows || col + w > self.cols || h == 0 || w == 0 {
            return Err(Error::OutOfRange(format!(
                "window {h}x{w} at ({row},{col}) in {}x{} cube",
                self.rows, self.cols
            )));
        }
        Ok(ImageCube::from_fn(h, w, self.bands, |r, c, b| {
            self.get(row + r, col + c, b)
        }))
    }
}

/// Concatenates the bands of `a` and `b`, `a` first.
pub fn stack(a: &ImageCube, b: &ImageCube) -> Result<ImageCube> {
    if !a.same_spatial(b) {
        return Err(Error::DimensionMismatch(format!(
            "cannot stack {}x{} with {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    data.extend_from_slice(&a.data);
    data.extend_from_slice(&b.data);
    Ok(ImageCube::from_raw(a.rows, a.cols, a.bands + b.bands, data))
}

/// Bands `[first, first + count)` of `cube`.
pub fn slice_bands(cube: &ImageCube, first: usize, count: usize) -> Result<ImageCube> {
    if first + count > cube.bands {
        return Err(Error::OutOfRange(format!(
            "bands [{first}, {}) of a {}-band cube",
            first + count,
            cube.bands
        )));
    }
    let n = cube.pixels();
    let data = cube.data[first * n..(first + count) * n].to_vec();
    Ok(ImageCube::from_raw(cube.rows, cube.cols, count, data))
}

pub fn encode_cube(cube: &ImageCube) -> Vec<u8> {
    let mut out = Vec::with_capacity(HSC1_HEADER_LEN + 4 * cube.data.len());
    out.extend_from_slice(HSC1_MAGIC);
    for d in [cube.rows, cube.cols, cube.bands] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &cube.data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_cube(bytes: &[u8]) -> Result<ImageCube> {
    if bytes.len() < 4 || &bytes[..4] != HSC1_MAGIC {
        return Err(Error::BadMagic { expected: "HSC1" });
    }
    if bytes.len() < HSC1_HEADER_LEN {
        return Err(Error::Truncated {
            expected: HSC1_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (rows, cols, bands) = (dim(1), dim(2), dim(3));
    let expected = HSC1_HEADER_LEN + 4 * rows * cols * bands;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let data = bytes[HSC1_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ImageCube::new(rows, cols, bands, data)
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<ImageCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn write_cube(cube: &ImageCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize, bands: usize) -> ImageCube {
        ImageCube::from_fn(rows, cols, bands, |r, c, b| (100 * b + 10 * r + c) as f64)
    }

    #[test]
    fn smallest_cube_encoding() {
        let bytes = encode_cube(&ImageCube::zeros(1, 1, 1));
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"HSC1");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..], &[0, 0, 0, 0]);
    }

    #[test]
    fn payload_size() {
        let bytes = encode_cube(&ramp(2, 3, 4));
        assert_eq!(bytes.len() - HSC1_HEADER_LEN, 2 * 3 * 4 * 4);
    }

    #[test]
    fn band_sequential_order() {
        let bytes = encode_cube(&ramp(2, 2, 2));
        let first: Vec<f32> = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(
            first,
            vec![0.0, 1.0, 10.0, 11.0, 100.0, 101.0, 110.0, 111.0]
        );
    }

    #[test]
    fn decode_errors_are_distinct() {
        assert!(matches!(decode_cube(b"HSC2"), Err(Error::BadMagic { .. })));
        assert!(matches!(
            decode_cube(&[0, 1, 2, 3]),
            Err(Error::BadMagic { .. })
        ));
        let mut bytes = encode_cube(&ramp(2, 2, 2));
        bytes.truncate(16 + 7 * 4);
        assert!(matches!(
            decode_cube(&bytes),
            Err(Error::Truncated {
                expected: 48,
                found: 44
            })
        ));
        assert!(matches!(
            decode_cube(b"HSC1\x01\x00"),
            Err(Error::Truncated { .. })
        ));
        let mut bytes = encode_cube(&ramp(1, 1, 1));
        bytes.push(0);
        assert!(matches!(decode_cube(&bytes), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn missing_file_is_reported() {
        let err = read_cube("/nonexistent/dir/cube.hsc").unwrap_err();
        assert!(matches!(err, Error::MissingFile(_)));
    }

    #[test]
    fn new_validates() {
        assert!(ImageCube::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(ImageCube::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(ImageCube::new(0, 1, 1, vec![]).is_err());
    }

    #[test]
    fn stack_orders_operands() {
        let a = ImageCube::filled(2, 2, 1, 1.0);
        let b = ImageCube::filled(2, 2, 1, 2.0);
        let s = stack(&a, &b).unwrap();
        assert_eq!(s.dims(), (2, 2, 2));
        assert_eq!(s.band(0), a.band(0));
        assert_eq!(s.band(1), b.band(0));
    }

    #[test]
    fn stack_identity_and_mismatch() {
        let c = ramp(3, 4, 2);
        assert_eq!(stack(&c, &ImageCube::empty(3, 4)).unwrap(), c);
        assert!(matches!(
            stack(&c, &ImageCube::zeros(4, 3, 1)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn slice_bands_bounds() {
        let c = ramp(3, 4, 5);
        assert_eq!(slice_bands(&c, 0, 5).unwrap(), c);
        let g = slice_bands(&c, 0, 2).unwrap();
        assert_eq!(g.dims(), (3, 4, 2));
        assert_eq!(g.band(1), c.band(1));
        assert!(slice_bands(&c, 5, 1).is_err());
        assert!(slice_bands(&c, 3, 3).is_err());
    }
}
