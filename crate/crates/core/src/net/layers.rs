use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tensor::Tensor4;
use crate::error::{Error, Result};
use crate::gemm::{gemm, View};

/// Upper bound on im2col buffer entries per chunk.
const COL_CHUNK: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// A bank of 3-D filters with shared biases.
///
/// Weights are stored filter-major, then `k1, k2, k3`, with the input channel
/// innermost, so one filter is a contiguous row matching the im2col layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3dLayer {
    pub filters: usize,
    pub in_channels: usize,
    pub kernel: [usize; 3],
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Conv3dLayer {
    pub fn zeros(
        filters: usize,
        in_channels: usize,
        kernel: [usize; 3],
        activation: Activation,
    ) -> Self {
        let k = kernel.iter().product::<usize>() * in_channels;
        Self {
            filters,
            in_channels,
            kernel,
            weights: vec![0.0; filters * k],
            biases: vec![0.0; filters],
            activation,
        }
    }

    /// Length of one filter: `k1·k2·k3·in_channels`.
    pub fn receptive_len(&self) -> usize {
        self.kernel.iter().product::<usize>() * self.in_channels
    }

    #[inline]
    fn weight_index(&self, f: usize, c: usize, a: usize, b: usize, d: usize) -> usize {
        let [_, k2, k3] = self.kernel;
        f * self.receptive_len() + ((a * k2 + b) * k3 + d) * self.in_channels + c
    }

    /// Weight of filter `f`, input channel `c`, kernel offset `(a, b, d)`.
    pub fn weight(&self, f: usize, c: usize, a: usize, b: usize, d: usize) -> f64 {
        self.weights[self.weight_index(f, c, a, b, d)]
    }

    pub fn set_weight(&mut self, f: usize, c: usize, a: usize, b: usize, d: usize, v: f64) {
        let i = self.weight_index(f, c, a, b, d);
        self.weights[i] = v;
    }

    fn output_dims(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        if input[3] != self.in_channels {
            return Err(Error::DimensionMismatch(format!(
                "layer expects {} channels, input has {}",
                self.in_channels, input[3]
            )));
        }
        let mut out = [0; 4];
        for axis in 0..3 {
            if self.kernel[axis] > input[axis] || self.kernel[axis] == 0 {
                return Err(Error::DimensionMismatch(format!(
                    "kernel {:?} larger than input {:?}",
                    self.kernel,
                    &input[..3]
                )));
            }
            out[axis] = input[axis] - self.kernel[axis] + 1;
        }
        out[3] = self.filters;
        Ok(out)
    }
}

/// Calls `f(first_voxel, voxel_count, col)` over chunks of the im2col matrix
/// of `input` for the given kernel.
fn for_each_col_chunk(
    input: &Tensor4,
    kernel: [usize; 3],
    out_dims: [usize; 4],
    mut f: impl FnMut(usize, usize, &[f64]),
) {
    let [_, _, _, ch] = input.dims();
    let [k1, k2, k3] = kernel;
    let [o1, o2, o3, _] = out_dims;
    let run = k3 * ch;
    let klen = k1 * k2 * run;
    let total = o1 * o2 * o3;
    let chunk = (COL_CHUNK / klen).max(1).min(total);
    let mut col = vec![0.0; chunk * klen];
    let src = input.as_slice();
    let mut start = 0;
    while start < total {
        let count = chunk.min(total - start);
        for v in 0..count {
            let voxel = start + v;
            let (i, rem) = (voxel / (o2 * o3), voxel % (o2 * o3));
            let (j, l) = (rem / o3, rem % o3);
            let row = &mut col[v * klen..(v + 1) * klen];
            for a in 0..k1 {
                for b in 0..k2 {
                    let s = input.index(i + a, j + b, l, 0);
                    let d = (a * k2 + b) * run;
                    row[d..d + run].copy_from_slice(&src[s..s + run]);
                }
            }
        }
        f(start, count, &col[..count * klen]);
        start += count;
    }
}

/// Valid 3-D correlation of `input` with every filter, plus bias, then activation.
pub fn conv3d_forward(input: &Tensor4, layer: &Conv3dLayer) -> Result<Tensor4> {
    let out_dims = layer.output_dims(input.dims())?;
    let (klen, nf) = (layer.receptive_len(), layer.filters);
    let mut out = vec![0.0; out_dims.iter().product()];
    for_each_col_chunk(input, layer.kernel, out_dims, |start, count, col| {
        let dst = &mut out[start * nf..(start + count) * nf];
        for row in dst.chunks_exact_mut(nf) {
            row.copy_from_slice(&layer.biases);
        }
        gemm(
            1.0,
            col,
            View::row_major(count, klen),
            &layer.weights,
            View::row_major(nf, klen).t(),
            1.0,
            dst,
            View::row_major(count, nf),
        );
    });
    if layer.activation == Activation::Relu {
        for v in &mut out {
            *v = v.max(0.0);
        }
    }
    Ok(Tensor4::from_raw(out_dims, out))
}

/// Parameter gradients of one convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvGrads {
    pub fn zeros_like(layer: &Conv3dLayer) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            biases: vec![0.0; layer.biases.len()],
        }
    }
}

/// Back-propagates through one convolution.
///
/// `output` is the post-activation forward result. Parameter gradients are
/// accumulated into `grads`; the input gradient is returned when requested.
pub(crate) fn conv3d_backward(
    input: &Tensor4,
    output: &Tensor4,
    layer: &Conv3dLayer,
    grad_out: &Tensor4,
    grads: &mut ConvGrads,
    want_input_grad: bool,
) -> Option<Tensor4> {
    let (klen, nf) = (layer.receptive_len(), layer.filters);
    let mut dz = grad_out.as_slice().to_vec();
    if layer.activation == Activation::Relu {
        for (g, &y) in dz.iter_mut().zip(output.as_slice()) {
            if y <= 0.0 {
                *g = 0.0;
            }
        }
    }
    for row in dz.chunks_exact(nf) {
        for (b, g) in grads.biases.iter_mut().zip(row) {
            *b += g;
        }
    }

    let out_dims = output.dims();
    let [k1, k2, k3] = layer.kernel;
    let ch = layer.in_channels;
    let run = k3 * ch;
    let [_, o2, o3, _] = out_dims;
    let mut dx = want_input_grad.then(|| Tensor4::zeros(input.dims()));
    let mut dcol = Vec::new();
    for_each_col_chunk(input, layer.kernel, out_dims, |start, count, col| {
        let dzc = &dz[start * nf..(start + count) * nf];
        // dW (nf × klen) += dZᵀ (nf × count) · col (count × klen)
        gemm(
            1.0,
            dzc,
            View::row_major(count, nf).t(),
            col,
            View::row_major(count, klen),
            1.0,
            &mut grads.weights,
            View::row_major(nf, klen),
        );
        if let Some(dx) = dx.as_mut() {
            dcol.resize(count * klen, 0.0);
            gemm(
                1.0,
                dzc,
                View::row_major(count, nf),
                &layer.weights,
                View::row_major(nf, klen),
                0.0,
                &mut dcol,
                View::row_major(count, klen),
            );
            for v in 0..count {
                let voxel = start + v;
                let (i, rem) = (voxel / (o2 * o3), voxel % (o2 * o3));
                let (j, l) = (rem / o3, rem % o3);
                let row = &dcol[v * klen..(v + 1) * klen];
                for a in 0..k1 {
                    for b in 0..k2 {
                        let s = dx.index(i + a, j + b, l, 0);
                        let d = (a * k2 + b) * run;
                        let dst = &mut dx.as_mut_slice()[s..s + run];
                        for (x, g) in dst.iter_mut().zip(&row[d..d + run]) {
                            *x += g;
                        }
                    }
                }
            }
        }
    });
    dx
}

/// Surrounds the first three axes with `pad[axis]` zeros on each side.
pub fn zero_pad(input: &Tensor4, pad: [usize; 3]) -> Tensor4 {
    if pad == [0, 0, 0] {
        return input.clone();
    }
    let [d1, d2, d3, ch] = input.dims();
    let dims = [d1 + 2 * pad[0], d2 + 2 * pad[1], d3 + 2 * pad[2], ch];
    let mut out = Tensor4::zeros(dims);
    let run = d3 * ch;
    for i in 0..d1 {
        for j in 0..d2 {
            let s = input.index(i, j, 0, 0);
            let d = out.index(i + pad[0], j + pad[1], pad[2], 0);
            out.as_mut_slice()[d..d + run].copy_from_slice(&input.as_slice()[s..s + run]);
        }
    }
    out
}

/// Inverse of [`zero_pad`] for gradients: crops the interior.
pub(crate) fn crop(input: &Tensor4, pad: [usize; 3]) -> Tensor4 {
    if pad == [0, 0, 0] {
        return input.clone();
    }
    let [p1, p2, p3, ch] = input.dims();
    let dims = [p1 - 2 * pad[0], p2 - 2 * pad[1], p3 - 2 * pad[2], ch];
    let mut out = Tensor4::zeros(dims);
    let run = dims[2] * ch;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let s = input.index(i + pad[0], j + pad[1], pad[2], 0);
            let d = out.index(i, j, 0, 0);
            out.as_mut_slice()[d..d + run].copy_from_slice(&input.as_slice()[s..s + run]);
        }
    }
    out
}

/// Adds i.i.d. `N(0, variance)` noise in train mode; identity in infer mode.
pub fn gaussian_noise<R: Rng + ?Sized>(
    input: &Tensor4,
    variance: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<Tensor4> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!("noise variance {variance}")));
    }
    if mode == Mode::Infer || variance == 0.0 {
        return Ok(input.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite std");
    let mut out = input.clone();
    for v in out.as_mut_slice() {
        *v += normal.sample(rng);
    }
    Ok(out)
}
