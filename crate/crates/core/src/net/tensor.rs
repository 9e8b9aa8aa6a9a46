use crate::cube::ImageCube;
use crate::error::{Error, Result};

/// Dense 4-D tensor `(d1, d2, d3, channels)` with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for tensor of dims {dims:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 4], value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        let [d1, d2, d3, ch] = dims;
        let mut n = 0;
        for i in 0..d1 {
            for j in 0..d2 {
                for k in 0..d3 {
                    for c in 0..ch {
                        t.data[n] = f(i, j, k, c);
                        n += 1;
                    }
                }
            }
        }
        t
    }

    pub(crate) fn from_raw(dims: [usize; 4], data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize, c: usize) -> usize {
        let [_, d2, d3, ch] = self.dims;
        ((i * d2 + j) * d3 + k) * ch + c
    }

    pub fn get(&self, i: usize, j: usize, k: usize, c: usize) -> f64 {
        self.data[self.index(i, j, k, c)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Treats the bands of a cube as the third axis of a 1-channel tensor.
    pub fn from_cube(cube: &ImageCube) -> Self {
        let (rows, cols, bands) = cube.dims();
        Self::from_fn([rows, cols, bands, 1], |i, j, k, _| cube.get(i, j, k))
    }

    /// Reads a `(rows, cols, 1, r)` tensor back as an `rows × cols × r` cube.
    pub fn channels_to_cube(&self) -> Result<ImageCube> {
        let [d1, d2, d3, ch] = self.dims;
        if d3 != 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected depth 1 output, got {d3}"
            )));
        }
        Ok(ImageCube::from_fn(d1, d2, ch, |r, c, b| {
            self.get(r, c, 0, b)
        }))
    }

    /// Spatial window `[i0, i0+h) × [j0, j0+w)` over full depth and channels.
    pub fn window(&self, i0: usize, j0: usize, h: usize, w: usize) -> Tensor4 {
        let [_, _, d3, ch] = self.dims;
        let row = d3 * ch;
        let mut data = Vec::with_capacity(h * w * row);
        for i in i0..i0 + h {
            let start = self.index(i, j0, 0, 0);
            data.extend_from_slice(&self.data[start..start + w * row]);
        }
        Tensor4::from_raw([h, w, d3, ch], data)
    }
}
