//! Central finite-difference verification of [`Network::backward`].

use super::{mse_loss, Activation, ForwardCache, Layer, Mode, Network, Tensor4};
use crate::error::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    /// Index into [`Network::param_slices_mut`].
    pub group: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Parameters skipped because a ReLU changed state inside `[θ-h, θ+h]`.
    pub kinks: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn relu_pattern(net: &Network, cache: &ForwardCache) -> Vec<bool> {
    let mut out = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        if let Layer::Conv(c) = layer {
            if c.activation == Activation::Relu {
                out.extend(
                    cache.activations()[i + 1]
                        .as_slice()
                        .iter()
                        .map(|&v| v > 0.0),
                );
            }
        }
    }
    out
}

fn loss_and_pattern(net: &Network, input: &Tensor4, target: &Tensor4) -> Result<(f64, Vec<bool>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (y, cache) = net.forward(input, &mut rng)?;
    Ok((mse_loss(&y, target)?.0, relu_pattern(net, &cache)))
}

/// Compares analytic MSE gradients with central differences of step `h` for
/// every parameter. Noise layers are disabled.
///
/// A parameter passes when `|a - n| <= abs_tol` or
/// `|a - n| / max(|a|, |n|) <= rel_tol`.
pub fn check_gradients(
    net: &Network,
    input: &Tensor4,
    target: &Tensor4,
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<GradCheckReport> {
    let mut net = net.clone();
    net.set_mode(Mode::Infer);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (y, cache) = net.forward(input, &mut rng)?;
    let (_, dy) = mse_loss(&y, target)?;
    let grads = net.backward(&cache, &dy)?;
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let mut report = GradCheckReport::default();
    for (group, values) in analytic.iter().enumerate() {
        for (index, &a) in values.iter().enumerate() {
            let orig = net.param_slices_mut()[group][index];
            net.param_slices_mut()[group][index] = orig + h;
            let (plus, pat_plus) = loss_and_pattern(&net, input, target)?;
            net.param_slices_mut()[group][index] = orig - h;
            let (minus, pat_minus) = loss_and_pattern(&net, input, target)?;
            net.param_slices_mut()[group][index] = orig;
            if pat_plus != pat_minus {
                report.kinks += 1;
                continue;
            }
            let n = (plus - minus) / (2.0 * h);
            let diff = (a - n).abs();
            let scale = a.abs().max(n.abs());
            let rel = if scale > 0.0 { diff / scale } else { 0.0 };
            report.checked += 1;
            if diff > abs_tol {
                report.max_rel_err = report.max_rel_err.max(rel);
                if rel > rel_tol {
                    report.failures.push(GradMismatch {
                        group,
                        index,
                        analytic: a,
                        numeric: n,
                    });
                }
            }
        }
    }
    Ok(report)
}
