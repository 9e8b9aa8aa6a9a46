//! A small 3-D convolutional network with hand-written reverse-mode gradients.
//!
//! The default architecture takes a `(rows, cols, r + P, 1)` tensor (the
//! stacked MS bands and interpolated loadings along the third axis) and
//! returns `(rows, cols, 1, r)`:
//!
//! | # | layer                                | activation |
//! |---|--------------------------------------|------------|
//! | 1 | zero pad (1,1,1)                     |            |
//! | 2 | conv3d, 32 filters, 3×3×3            | ReLU       |
//! | 3 | Gaussian noise (0.5)                 |            |
//! | 4 | zero pad (1,1,1)                     |            |
//! | 5 | conv3d, 64 filters, 3×3×3            | ReLU       |
//! | 6 | Gaussian noise (0.5)                 |            |
//! | 7 | conv3d, r filters, 1×1×(r+P)         | linear     |
//!
//! The last layer spans the whole third axis, so the `r` output channels are
//! the `r` sharpened loadings.

mod adam;
pub mod gradcheck;
mod layers;
mod tensor;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{
    conv3d_forward, gaussian_noise, zero_pad, Activation, Conv3dLayer, ConvGrads, Mode,
};
pub use tensor::Tensor4;

use crate::error::{Error, Result};
use layers::{conv3d_backward, crop};

/// Serializable description of one layer (no parameters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    ZeroPad {
        pad: [usize; 3],
    },
    Conv3d {
        filters: usize,
        in_channels: usize,
        kernel: [usize; 3],
        activation: Activation,
    },
    GaussianNoise {
        variance: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    ZeroPad([usize; 3]),
    Conv(Conv3dLayer),
    GaussianNoise(f64),
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::ZeroPad(pad) => LayerSpec::ZeroPad { pad: *pad },
            Layer::Conv(c) => LayerSpec::Conv3d {
                filters: c.filters,
                in_channels: c.in_channels,
                kernel: c.kernel,
                activation: c.activation,
            },
            Layer::GaussianNoise(v) => LayerSpec::GaussianNoise { variance: *v },
        }
    }

    fn from_spec(spec: &LayerSpec) -> Self {
        match *spec {
            LayerSpec::ZeroPad { pad } => Layer::ZeroPad(pad),
            LayerSpec::Conv3d {
                filters,
                in_channels,
                kernel,
                activation,
            } => Layer::Conv(Conv3dLayer::zeros(filters, in_channels, kernel, activation)),
            LayerSpec::GaussianNoise { variance } => Layer::GaussianNoise(variance),
        }
    }
}

/// Architecture parameters for the padded-conv / noise stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    /// Length of the third input axis (`r + P`).
    pub input_depth: usize,
    pub hidden_filters: Vec<usize>,
    /// Odd cubic kernel size of the hidden layers.
    pub kernel: usize,
    /// Number of output loadings `r`.
    pub outputs: usize,
    pub noise_variance: f64,
}

impl NetSpec {
    /// The default 32/64/r architecture.
    pub fn standard(r: usize, ms_bands: usize) -> Self {
        Self {
            input_depth: r + ms_bands,
            hidden_filters: vec![32, 64],
            kernel: 3,
            outputs: r,
            noise_variance: 0.5,
        }
    }

    pub fn layers(&self) -> Vec<LayerSpec> {
        let p = (self.kernel - 1) / 2;
        let mut out = Vec::new();
        let mut channels = 1;
        for &h in &self.hidden_filters {
            out.push(LayerSpec::ZeroPad { pad: [p, p, p] });
            out.push(LayerSpec::Conv3d {
                filters: h,
                in_channels: channels,
                kernel: [self.kernel; 3],
                activation: Activation::Relu,
            });
            out.push(LayerSpec::GaussianNoise {
                variance: self.noise_variance,
            });
            channels = h;
        }
        out.push(LayerSpec::Conv3d {
            filters: self.outputs,
            in_channels: channels,
            kernel: [1, 1, self.input_depth],
            activation: Activation::Linear,
        });
        out
    }

    fn validate(&self) -> Result<()> {
        if self.kernel.is_multiple_of(2) || self.outputs == 0 || self.input_depth == 0 {
            return Err(Error::InvalidArgument(format!(
                "invalid network spec {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    mode: Mode,
    version: u64,
}

/// Per-layer activations from a forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Tensor4>,
    version: u64,
}

impl ForwardCache {
    /// `activations()[0]` is the input, `activations()[i + 1]` the output of layer `i`.
    pub fn activations(&self) -> &[Tensor4] {
        &self.activations
    }
}

/// Gradients for every convolution layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub convs: Vec<ConvGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            convs: net.conv_layers().map(ConvGrads::zeros_like).collect(),
        }
    }

    /// Flat views in the same order as [`Network::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        self.convs
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.biases.as_slice()])
            .collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            a.weights
                .iter_mut()
                .zip(&b.weights)
                .for_each(|(x, y)| *x += y);
            a.biases
                .iter_mut()
                .zip(&b.biases)
                .for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.convs {
            g.weights.iter_mut().for_each(|x| *x *= s);
            g.biases.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params<R: Rng + ?Sized>(rng: &mut R, spec: &NetSpec) -> Result<Network> {
    spec.validate()?;
    let mut net = Network::from_layer_specs(&spec.layers())?;
    for layer in &mut net.layers {
        if let Layer::Conv(c) = layer {
            let taps: usize = c.kernel.iter().product();
            let fan_in = (c.in_channels * taps) as f64;
            let fan_out = (c.filters * taps) as f64;
            let limit = (6.0 / (fan_in + fan_out)).sqrt();
            for w in &mut c.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
    }
    Ok(net)
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Tensor4, target: &Tensor4) -> Result<(f64, Tensor4)> {
    if pred.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.dims(),
            target.dims()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Tensor4::from_raw(pred.dims(), grad)))
}

impl Network {
    /// Network with the given layers and all-zero parameters.
    pub fn from_layer_specs(specs: &[LayerSpec]) -> Result<Self> {
        for (i, s) in specs.iter().enumerate() {
            match s {
                LayerSpec::Conv3d {
                    filters,
                    in_channels,
                    kernel,
                    ..
                } => {
                    if *filters == 0 || *in_channels == 0 || kernel.contains(&0) {
                        return Err(Error::Layer {
                            layer: i,
                            msg: format!("degenerate conv {s:?}"),
                        });
                    }
                }
                LayerSpec::GaussianNoise { variance } if !(*variance >= 0.0) => {
                    return Err(Error::Layer {
                        layer: i,
                        msg: "negative noise variance".into(),
                    });
                }
                _ => {}
            }
        }
        Ok(Self {
            layers: specs.iter().map(Layer::from_spec).collect(),
            mode: Mode::Train,
            version: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &Conv3dLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
    }

    pub fn conv_layers_mut(&mut self) -> impl Iterator<Item = &mut Conv3dLayer> {
        self.version += 1;
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
    }

    /// Mutable parameter slices: weights then biases of each conv layer.
    ///
    /// Borrowing them invalidates outstanding forward caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.conv_layers_mut()
            .flat_map(|c| [c.weights.as_mut_slice(), c.biases.as_mut_slice()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.conv_layers()
            .map(|c| c.weights.len() + c.biases.len())
            .sum()
    }

    /// Number of output loadings (filters of the last conv layer).
    pub fn outputs(&self) -> usize {
        self.conv_layers().last().map_or(0, |c| c.filters)
    }

    /// Spatial context consumed on each side of the first two axes.
    pub fn spatial_margin(&self) -> usize {
        self.conv_layers()
            .map(|c| (c.kernel[0].max(c.kernel[1]) - 1) / 2)
            .sum()
    }

    fn apply<R: Rng + ?Sized>(
        &self,
        i: usize,
        x: &Tensor4,
        rng: &mut R,
        mode: Mode,
    ) -> Result<Tensor4> {
        let wrap = |e: Error| Error::Layer {
            layer: i,
            msg: e.to_string(),
        };
        match &self.layers[i] {
            Layer::ZeroPad(p) => Ok(zero_pad(x, *p)),
            Layer::Conv(c) => conv3d_forward(x, c).map_err(wrap),
            Layer::GaussianNoise(v) => gaussian_noise(x, *v, rng, mode).map_err(wrap),
        }
    }

    /// Forward pass in the network's current mode, keeping activations.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        input: &Tensor4,
        rng: &mut R,
    ) -> Result<(Tensor4, ForwardCache)> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for i in 0..self.layers.len() {
            let next = self.apply(i, activations.last().unwrap(), rng, self.mode)?;
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((
            out,
            ForwardCache {
                activations,
                version: self.version,
            },
        ))
    }

    /// Inference-mode forward pass without a cache.
    pub fn predict(&self, input: &Tensor4) -> Result<Tensor4> {
        // infer mode never draws from the generator
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            x = match &self.layers[i] {
                Layer::GaussianNoise(_) => x,
                _ => self.apply(i, &x, &mut rng, Mode::Infer)?,
            };
        }
        Ok(x)
    }

    /// Exact gradients of a scalar loss given `dLoss/dOutput`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Tensor4) -> Result<Gradients> {
        if cache.version != self.version || cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::InvalidArgument(
                "forward cache does not match this network".into(),
            ));
        }
        let out = cache.activations.last().unwrap();
        if out.dims() != loss_grad.dims() {
            return Err(Error::DimensionMismatch(format!(
                "loss gradient {:?} vs output {:?}",
                loss_grad.dims(),
                out.dims()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let first_conv = self.layers.iter().position(|l| matches!(l, Layer::Conv(_)));
        let mut conv_idx = grads.convs.len();
        let mut g = loss_grad.clone();
        for i in (0..self.layers.len()).rev() {
            if first_conv.is_some_and(|f| i < f) {
                break;
            }
            match &self.layers[i] {
                Layer::ZeroPad(p) => g = crop(&g, *p),
                Layer::GaussianNoise(_) => {}
                Layer::Conv(c) => {
                    conv_idx -= 1;
                    let want_input = Some(i) != first_conv;
                    let dx = conv3d_backward(
                        &cache.activations[i],
                        &cache.activations[i + 1],
                        c,
                        &g,
                        &mut grads.convs[conv_idx],
                        want_input,
                    );
                    match dx {
                        Some(dx) => g = dx,
                        None => break,
                    }
                }
            }
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_stack_matches_table() {
        let specs = NetSpec::standard(10, 4).layers();
        assert_eq!(specs.len(), 7);
        assert_eq!(specs[0], LayerSpec::ZeroPad { pad: [1, 1, 1] });
        assert_eq!(
            specs[1],
            LayerSpec::Conv3d {
                filters: 32,
                in_channels: 1,
                kernel: [3, 3, 3],
                activation: Activation::Relu
            }
        );
        assert_eq!(specs[2], LayerSpec::GaussianNoise { variance: 0.5 });
        assert_eq!(specs[3], LayerSpec::ZeroPad { pad: [1, 1, 1] });
        assert_eq!(
            specs[4],
            LayerSpec::Conv3d {
                filters: 64,
                in_channels: 32,
                kernel: [3, 3, 3],
                activation: Activation::Relu
            }
        );
        assert_eq!(specs[5], LayerSpec::GaussianNoise { variance: 0.5 });
        assert_eq!(
            specs[6],
            LayerSpec::Conv3d {
                filters: 10,
                in_channels: 64,
                kernel: [1, 1, 14],
                activation: Activation::Linear
            }
        );
    }

    #[test]
    fn output_shape_on_patch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = init_params(&mut rng, &NetSpec::standard(2, 4)).unwrap();
        let x = Tensor4::filled([7, 7, 6, 1], 0.3);
        let (y, cache) = net.forward(&x, &mut rng).unwrap();
        assert_eq!(y.dims(), [7, 7, 1, 2]);
        assert_eq!(cache.activations().len(), 8);
        assert_eq!(net.spatial_margin(), 2);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let net = Network::from_layer_specs(&NetSpec::standard(2, 3).layers()).unwrap();
        let x = Tensor4::filled([5, 5, 5, 1], 1.7);
        assert!(net
            .predict(&x)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn inference_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = init_params(&mut rng, &NetSpec::standard(2, 3)).unwrap();
        net.set_mode(Mode::Infer);
        let x = Tensor4::from_fn([6, 5, 5, 1], |i, j, k, _| (i + 2 * j + 3 * k) as f64 * 0.1);
        let (a, _) = net.forward(&x, &mut rng).unwrap();
        let (b, _) = net.forward(&x, &mut rng).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, net.predict(&x).unwrap());
    }

    #[test]
    fn shape_errors_name_layer() {
        let net = Network::from_layer_specs(&NetSpec::standard(2, 3).layers()).unwrap();
        let err = net.predict(&Tensor4::zeros([5, 5, 4, 1])).unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 6, .. }), "{err}");
        let err = net.predict(&Tensor4::zeros([5, 5, 5, 2])).unwrap_err();
        assert!(matches!(err, Error::Layer { layer: 1, .. }), "{err}");
    }

    #[test]
    fn init_is_seeded() {
        let spec = NetSpec::standard(2, 3);
        let a = init_params(&mut ChaCha8Rng::seed_from_u64(5), &spec).unwrap();
        let b = init_params(&mut ChaCha8Rng::seed_from_u64(5), &spec).unwrap();
        let c = init_params(&mut ChaCha8Rng::seed_from_u64(6), &spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.conv_layers().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn glorot_variance() {
        // second layer: 64 filters of 3x3x3 over 64 channels, 110592 weights
        let spec = NetSpec {
            input_depth: 5,
            hidden_filters: vec![64, 64],
            kernel: 3,
            outputs: 1,
            noise_variance: 0.0,
        };
        let net = init_params(&mut ChaCha8Rng::seed_from_u64(7), &spec).unwrap();
        let layer = net.conv_layers().nth(1).unwrap();
        let n = layer.weights.len() as f64;
        assert!(n > 1e5);
        let var = layer.weights.iter().map(|w| w * w).sum::<f64>() / n;
        let want = 2.0 / ((64 * 27 + 64 * 27) as f64);
        assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
    }

    #[test]
    fn mse_values() {
        let t = Tensor4::from_fn([2, 3, 1, 2], |i, j, _, c| (i * 3 + j + c) as f64);
        let (l, g) = mse_loss(&t, &t).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        let p = Tensor4::from_fn([2, 3, 1, 2], |i, j, _, c| (i * 3 + j + c) as f64 + 1.0);
        assert_eq!(mse_loss(&p, &t).unwrap().0, 1.0);
        assert!(mse_loss(&p, &Tensor4::zeros([1, 1, 1, 1])).is_err());
    }

    #[test]
    fn mse_matches_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = Tensor4::from_fn([3, 2, 2, 3], |_, _, _, _| rng.random_range(-2.0..2.0));
        let t = Tensor4::from_fn([3, 2, 2, 3], |_, _, _, _| rng.random_range(-2.0..2.0));
        let (l, g) = mse_loss(&p, &t).unwrap();
        let mut s = 0.0;
        for i in 0..p.len() {
            let d = p.as_slice()[i] - t.as_slice()[i];
            s += d * d;
            assert!((g.as_slice()[i] - 2.0 * d / 36.0).abs() < 1e-15);
        }
        assert!((l - s / 36.0).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = init_params(&mut rng, &NetSpec::standard(2, 2)).unwrap();
        let x = Tensor4::from_fn([5, 5, 4, 1], |_, _, _, _| rng.random_range(0.0..1.0));
        let (y, cache) = net.forward(&x, &mut rng).unwrap();
        let g = net.backward(&cache, &Tensor4::zeros(y.dims())).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut net = init_params(&mut rng, &NetSpec::standard(2, 2)).unwrap();
        let x = Tensor4::filled([5, 5, 4, 1], 0.5);
        let (y, cache) = net.forward(&x, &mut rng).unwrap();
        net.param_slices_mut()[0][0] += 1.0;
        assert!(net.backward(&cache, &Tensor4::zeros(y.dims())).is_err());
    }
}
