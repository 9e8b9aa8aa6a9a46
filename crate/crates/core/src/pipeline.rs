//! Training at the reduced scale and full-resolution fusion.
//!
//! Training: the HS image is decomposed into loadings `G`, the MS image and
//! the first `r` loadings are brought down to the HS scale (the loadings are
//! decimated once more and interpolated back), and the network learns to map
//! the stacked `[X_LR^MS  G̃_LR^r]` patches onto the true `G^r` patches.
//!
//! Fusion: the same network is applied to `[X^MS  G̃^r]` at full resolution
//! and its output replaces the interpolated leading loadings before the
//! inverse transform.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{stack, ImageCube};
use crate::error::{Error, Result};
use crate::linalg::{pca_decompose, reconstruct_full, reconstruct_reduced, PcaModel};
use crate::net::{
    init_params, mse_loss, AdamConfig, AdamState, Gradients, LayerSpec, Mode, NetSpec, Network,
    Tensor4,
};
use crate::resample::{decimate, interpolate, FilterKind};

/// RNG stream ids derived from [`TrainConfig::seed`].
pub(crate) mod streams {
    pub const PATCHES: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const NOISE: u64 = 4;
}

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of leading loadings to sharpen.
    pub r: usize,
    pub patch_size: usize,
    pub n_patches: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub noise_variance: f64,
    pub hidden_filters: Vec<usize>,
    pub adam: AdamConfig,
    pub seed: u64,
    /// MS/HS resolution ratio.
    pub scale_factor: usize,
    pub filter: FilterKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            r: 10,
            patch_size: 7,
            n_patches: 8192,
            epochs: 50,
            batch_size: 5,
            noise_variance: 0.5,
            hidden_filters: vec![32, 64],
            adam: AdamConfig::default(),
            seed: 0,
            scale_factor: 4,
            filter: FilterKind::Bicubic,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.patch_size.is_multiple_of(2) {
            return bad(format!("patch size must be odd, got {}", self.patch_size));
        }
        if self.r == 0
            || self.n_patches == 0
            || self.epochs == 0
            || self.batch_size == 0
            || self.scale_factor == 0
        {
            return bad(
                "r, n_patches, epochs, batch_size and scale_factor must be positive".into(),
            );
        }
        if self.n_patches < self.batch_size {
            return bad(format!(
                "{} patches cannot fill a batch of {}",
                self.n_patches, self.batch_size
            ));
        }
        if !(self.noise_variance >= 0.0) {
            return bad(format!("noise variance {}", self.noise_variance));
        }
        if self.hidden_filters.contains(&0) {
            return bad("hidden layers need at least one filter".into());
        }
        Ok(())
    }

    pub fn net_spec(&self, ms_bands: usize) -> NetSpec {
        NetSpec {
            input_depth: self.r + ms_bands,
            hidden_filters: self.hidden_filters.clone(),
            kernel: 3,
            outputs: self.r,
            noise_variance: self.noise_variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FuseMode {
    /// Sharpened leading loadings plus interpolated remaining loadings.
    Full,
    /// Rank-`r` reconstruction from the sharpened loadings only.
    Reduced,
}

impl fmt::Display for FuseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuseMode::Full => "full",
            FuseMode::Reduced => "reduced",
        })
    }
}

impl FromStr for FuseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(FuseMode::Full),
            "reduced" => Ok(FuseMode::Reduced),
            other => Err(Error::Parse {
                what: "fusion mode",
                msg: format!("unknown mode {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    /// `(p, p, r + P, 1)` input patches.
    pub inputs: Vec<Tensor4>,
    /// `(p, p, 1, r)` target patches.
    pub targets: Vec<Tensor4>,
    /// Top-left corners in the reduced-scale image, index-matched to the patches.
    pub corners: Vec<(usize, usize)>,
    /// Normalization divisor applied to inputs and targets.
    pub scale: f64,
    pub ms_bands: usize,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    /// `M × N × q` estimate.
    pub fused: ImageCube,
    /// `M × N × r` sharpened loadings.
    pub loadings_hr: ImageCube,
    pub loss_history: Vec<f64>,
    pub mode: FuseMode,
}

fn check_pair(ms: &ImageCube, hs: &ImageCube, factor: usize) -> Result<()> {
    if ms.rows() != hs.rows() * factor || ms.cols() != hs.cols() * factor {
        return Err(Error::DimensionMismatch(format!(
            "MS {}x{} is not {factor} times HS {}x{}",
            ms.rows(),
            ms.cols(),
            hs.rows(),
            hs.cols()
        )));
    }
    Ok(())
}

fn patch_tensor(
    cube: &ImageCube,
    row: usize,
    col: usize,
    size: usize,
    scale: f64,
    as_channels: bool,
) -> Tensor4 {
    let bands = cube.bands();
    if as_channels {
        Tensor4::from_fn([size, size, 1, bands], |i, j, _, c| {
            cube.get(row + i, col + j, c) / scale
        })
    } else {
        Tensor4::from_fn([size, size, bands, 1], |i, j, k, _| {
            cube.get(row + i, col + j, k) / scale
        })
    }
}

/// Builds the reduced-scale training patches and returns them with the PCA of `hs`.
pub fn prepare_training_set(
    ms: &ImageCube,
    hs: &ImageCube,
    cfg: &TrainConfig,
) -> Result<(TrainingSet, PcaModel)> {
    cfg.validate()?;
    let f = cfg.scale_factor;
    check_pair(ms, hs, f)?;
    if cfg.r > hs.bands() {
        return Err(Error::OutOfRange(format!(
            "r = {} exceeds the {} HS bands",
            cfg.r,
            hs.bands()
        )));
    }
    if hs.rows() < cfg.patch_size || hs.cols() < cfg.patch_size {
        return Err(Error::DimensionMismatch(format!(
            "reduced-scale image {}x{} is smaller than a {}-pixel patch",
            hs.rows(),
            hs.cols(),
            cfg.patch_size
        )));
    }

    let pca = pca_decompose(hs)?;
    let g_r = pca.leading_loadings(cfg.r)?;
    let ms_lr = decimate(ms, f, cfg.filter)?;
    let g_lr = interpolate(&decimate(&g_r, f, cfg.filter)?, f, cfg.filter)?;
    let x_lr = stack(&ms_lr, &g_lr)?;
    let peak = x_lr.max_abs();
    let scale = if peak > 0.0 { peak } else { 1.0 };

    let p = cfg.patch_size;
    let mut rng = seeded(cfg.seed, streams::PATCHES);
    let (max_r, max_c) = (hs.rows() - p, hs.cols() - p);
    let corners: Vec<(usize, usize)> = (0..cfg.n_patches)
        .map(|_| (rng.random_range(0..=max_r), rng.random_range(0..=max_c)))
        .collect();
    let inputs = corners
        .iter()
        .map(|&(r, c)| patch_tensor(&x_lr, r, c, p, scale, false))
        .collect();
    let targets = corners
        .iter()
        .map(|&(r, c)| patch_tensor(&g_r, r, c, p, scale, true))
        .collect();
    Ok((
        TrainingSet {
            inputs,
            targets,
            corners,
            scale,
            ms_bands: ms.bands(),
        },
        pca,
    ))
}

/// Trains a freshly initialized network; returns it in inference mode together
/// with the mean mini-batch loss of every epoch.
pub fn train(set: &TrainingSet, cfg: &TrainConfig) -> Result<(Network, Vec<f64>)> {
    train_with_progress(set, cfg, |_, _| {})
}

pub fn train_with_progress(
    set: &TrainingSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    if set.inputs.len() != set.targets.len() || set.inputs.len() < cfg.batch_size {
        return Err(Error::InvalidArgument(format!(
            "{} inputs / {} targets for batch size {}",
            set.inputs.len(),
            set.targets.len(),
            cfg.batch_size
        )));
    }
    let mut net = init_params(
        &mut seeded(cfg.seed, streams::INIT),
        &cfg.net_spec(set.ms_bands),
    )?;
    net.set_mode(Mode::Train);
    let shapes: Vec<usize> = net.param_slices_mut().iter().map(|s| s.len()).collect();
    let mut adam = AdamState::new(cfg.adam, &shapes);
    let mut rng = seeded(cfg.seed, streams::TRAIN);

    let mut order: Vec<usize> = (0..set.inputs.len()).collect();
    let batches = set.inputs.len() / cfg.batch_size;
    let inv_batch = 1.0 / cfg.batch_size as f64;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks_exact(cfg.batch_size).take(batches) {
            let mut grads = Gradients::zeros_like(&net);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (y, cache) = net.forward(&set.inputs[i], &mut rng)?;
                let (loss, mut dy) = mse_loss(&y, &set.targets[i])?;
                dy.as_mut_slice().iter_mut().for_each(|g| *g *= inv_batch);
                grads.add_assign(&net.backward(&cache, &dy)?);
                batch_loss += loss * inv_batch;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            adam.step(&mut net.param_slices_mut(), &grads.slices())?;
            epoch_loss += batch_loss;
        }
        let mean = epoch_loss / batches as f64;
        on_epoch(epoch, mean);
        history.push(mean);
    }
    net.set_mode(Mode::Infer);
    Ok((net, history))
}

/// Inference over overlapping spatial tiles, keeping only each tile's core.
///
/// Every tile is extended by the network's receptive margin, so the result
/// equals a whole-image pass.
pub fn predict_tiled(net: &Network, input: &Tensor4, tile: usize) -> Result<Tensor4> {
    if tile == 0 {
        return Err(Error::InvalidArgument("tile size must be positive".into()));
    }
    let [d1, d2, ..] = input.dims();
    let m = net.spatial_margin();
    let mut out: Option<Tensor4> = None;
    for i0 in (0..d1).step_by(tile) {
        for j0 in (0..d2).step_by(tile) {
            let (h, w) = (tile.min(d1 - i0), tile.min(d2 - j0));
            let (a0, b0) = (i0.saturating_sub(m), j0.saturating_sub(m));
            let (a1, b1) = ((i0 + h + m).min(d1), (j0 + w + m).min(d2));
            let y = net.predict(&input.window(a0, b0, a1 - a0, b1 - b0))?;
            let [_, _, o3, oc] = y.dims();
            let out = out.get_or_insert_with(|| Tensor4::zeros([d1, d2, o3, oc]));
            let run = w * o3 * oc;
            for i in 0..h {
                let src = y.index(i0 - a0 + i, j0 - b0, 0, 0);
                let dst = out.index(i0 + i, j0, 0, 0);
                out.as_mut_slice()[dst..dst + run].copy_from_slice(&y.as_slice()[src..src + run]);
            }
        }
    }
    Ok(out.expect("non-empty input"))
}

/// A trained network with everything needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub config: TrainConfig,
    /// Normalization divisor from training.
    pub scale: f64,
    pub ms_bands: usize,
    pub loss_history: Vec<f64>,
}

/// Runs [`prepare_training_set`] and [`train`].
pub fn fit(ms: &ImageCube, hs: &ImageCube, cfg: &TrainConfig) -> Result<(TrainedModel, PcaModel)> {
    let (set, pca) = prepare_training_set(ms, hs, cfg)?;
    let (network, loss_history) = train(&set, cfg)?;
    Ok((
        TrainedModel {
            network,
            config: cfg.clone(),
            scale: set.scale,
            ms_bands: set.ms_bands,
            loss_history,
        },
        pca,
    ))
}

/// Full-resolution fusion in one pass over the whole image.
pub fn fuse(
    model: &TrainedModel,
    ms: &ImageCube,
    hs: &ImageCube,
    pca: &PcaModel,
    mode: FuseMode,
) -> Result<FusionResult> {
    fuse_tiled(model, ms, hs, pca, mode, None)
}

/// As [`fuse`], optionally running the network tile by tile to bound memory.
pub fn fuse_tiled(
    model: &TrainedModel,
    ms: &ImageCube,
    hs: &ImageCube,
    pca: &PcaModel,
    mode: FuseMode,
    tile: Option<usize>,
) -> Result<FusionResult> {
    let cfg = &model.config;
    let (r, f) = (cfg.r, cfg.scale_factor);
    if ms.bands() != model.ms_bands {
        return Err(Error::DimensionMismatch(format!(
            "model was trained with {} MS bands, got {}",
            model.ms_bands,
            ms.bands()
        )));
    }
    if model.network.outputs() != r {
        return Err(Error::DimensionMismatch(format!(
            "network produces {} loadings, config says r = {r}",
            model.network.outputs()
        )));
    }
    if pca.bands() != hs.bands() || r > hs.bands() {
        return Err(Error::DimensionMismatch(format!(
            "PCA of {} bands, HS has {}, r = {r}",
            pca.bands(),
            hs.bands()
        )));
    }
    if pca.loadings().dims().0 != hs.rows() || pca.loadings().dims().1 != hs.cols() {
        return Err(Error::DimensionMismatch(
            "PCA model does not belong to this HS image".into(),
        ));
    }
    check_pair(ms, hs, f)?;

    let g_tilde = interpolate(&pca.leading_loadings(r)?, f, cfg.filter)?;
    let x = stack(ms, &g_tilde)?.scale(1.0 / model.scale);
    let input = Tensor4::from_cube(&x);
    let y = match tile {
        Some(t) => predict_tiled(&model.network, &input, t)?,
        None => model.network.predict(&input)?,
    };
    let loadings_hr = y.channels_to_cube()?.scale(model.scale);
    let fused = match mode {
        FuseMode::Full => {
            let rest = interpolate(&pca.trailing_loadings(r)?, f, cfg.filter)?;
            reconstruct_full(&loadings_hr, &rest, pca)?
        }
        FuseMode::Reduced => reconstruct_reduced(&loadings_hr, pca, r)?,
    };
    if fused.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fused image"));
    }
    Ok(FusionResult {
        fused,
        loadings_hr,
        loss_history: model.loss_history.clone(),
        mode,
    })
}

// ---------------------------------------------------------------------------
// Model file

pub const MODEL_MAGIC: &[u8; 4] = b"HSFM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layers: Vec<LayerSpec>,
    config: TrainConfig,
    scale: f64,
    ms_bands: usize,
    loss_history: Vec<f64>,
    param_count: usize,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader {
            layers: self.network.layer_specs(),
            config: self.config.clone(),
            scale: self.scale,
            ms_bands: self.ms_bands,
            loss_history: self.loss_history.clone(),
            param_count: self.network.param_count(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + 8 * header.param_count + 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&self.scale.to_le_bytes());
        for layer in self.network.conv_layers() {
            for v in layer.weights.iter().chain(&layer.biases) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |msg: String| Error::Parse {
            what: "model file",
            msg,
        };
        if bytes.len() < 16 || &bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic { expected: "HSFM" });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = bytes.get(16..16 + len).ok_or(Error::Truncated {
            expected: 16 + len,
            found: bytes.len(),
        })?;
        let header: ModelHeader = serde_json::from_slice(json).map_err(|e| err(e.to_string()))?;
        let mut network = Network::from_layer_specs(&header.layers)?;
        if network.param_count() != header.param_count {
            return Err(err("parameter count disagrees with the layer list".into()));
        }
        let body = &bytes[16 + len..];
        let expected = 8 * (header.param_count + 1);
        if body.len() != expected {
            return Err(Error::Truncated {
                expected: 16 + len + expected,
                found: bytes.len(),
            });
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let scale = values.next().unwrap();
        for slice in network.param_slices_mut() {
            for v in slice.iter_mut() {
                *v = values.next().unwrap();
            }
        }
        if !scale.is_finite()
            || network
                .conv_layers()
                .any(|c| c.weights.iter().chain(&c.biases).any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("model parameters"));
        }
        network.set_mode(Mode::Infer);
        Ok(Self {
            network,
            config: header.config,
            scale,
            ms_bands: header.ms_bands,
            loss_history: header.loss_history,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{make_wald_pair, synthetic_scene, SpectralResponse};

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            r: 2,
            n_patches: 40,
            epochs: 2,
            hidden_filters: vec![4, 6],
            seed: 3,
            ..TrainConfig::default()
        }
    }

    fn pair() -> (ImageCube, ImageCube) {
        let reference = synthetic_scene(32, 32, 6, 3, 1).unwrap();
        let resp = SpectralResponse::block_average(3, 6).unwrap();
        let p = make_wald_pair(&reference, &resp, 4, FilterKind::Bicubic).unwrap();
        (p.ms, p.lr_hs)
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            patch_size: 6,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            n_patches: 4,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn training_set_shapes_and_determinism() {
        let (ms, hs) = pair();
        let cfg = small_cfg();
        let (set, pca) = prepare_training_set(&ms, &hs, &cfg).unwrap();
        assert_eq!(set.inputs.len(), 40);
        assert_eq!(set.inputs[0].dims(), [7, 7, 5, 1]);
        assert_eq!(set.targets[0].dims(), [7, 7, 1, 2]);
        assert_eq!(pca.bands(), 6);
        assert!(set.corners.iter().all(|&(r, c)| r + 7 <= 8 && c + 7 <= 8));
        let (again, _) = prepare_training_set(&ms, &hs, &cfg).unwrap();
        assert_eq!(set.corners, again.corners);
        assert!(set
            .inputs
            .iter()
            .all(|t| t.as_slice().iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn training_set_errors() {
        let (ms, hs) = pair();
        let cfg = small_cfg();
        assert!(prepare_training_set(
            &ms,
            &hs,
            &TrainConfig {
                r: 7,
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(prepare_training_set(
            &ms,
            &hs,
            &TrainConfig {
                scale_factor: 2,
                ..cfg.clone()
            }
        )
        .is_err());
        let tiny_ms = ImageCube::filled(16, 16, 3, 1.0);
        let tiny_hs = ImageCube::filled(4, 4, 6, 1.0);
        assert!(prepare_training_set(&tiny_ms, &tiny_hs, &cfg).is_err());
    }

    #[test]
    fn constant_inputs_give_constant_patches() {
        let ms = ImageCube::filled(32, 32, 3, 2.0);
        let hs = ImageCube::filled(8, 8, 6, 1.5);
        let (set, _) = prepare_training_set(&ms, &hs, &small_cfg()).unwrap();
        for t in set.inputs.iter().chain(&set.targets) {
            let [_, _, d3, ch] = t.dims();
            for k in 0..d3 {
                for c in 0..ch {
                    let v0 = t.get(0, 0, k, c);
                    for i in 0..7 {
                        for j in 0..7 {
                            assert!((t.get(i, j, k, c) - v0).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn history_length_and_fusion_dims() {
        let (ms, hs) = pair();
        let cfg = small_cfg();
        let (model, pca) = fit(&ms, &hs, &cfg).unwrap();
        assert_eq!(model.loss_history.len(), 2);
        assert_eq!(model.network.mode(), Mode::Infer);
        for mode in [FuseMode::Full, FuseMode::Reduced] {
            let out = fuse(&model, &ms, &hs, &pca, mode).unwrap();
            assert_eq!(out.fused.dims(), (32, 32, 6));
            assert_eq!(out.loadings_hr.dims(), (32, 32, 2));
        }
        assert!(fuse(
            &model,
            &ImageCube::zeros(32, 32, 4),
            &hs,
            &pca,
            FuseMode::Full
        )
        .is_err());
    }

    #[test]
    fn full_mode_with_all_components_ignores_remainder() {
        let (ms, hs) = pair();
        let cfg = TrainConfig {
            r: 6,
            ..small_cfg()
        };
        let (model, pca) = fit(&ms, &hs, &cfg).unwrap();
        let full = fuse(&model, &ms, &hs, &pca, FuseMode::Full).unwrap();
        let reduced = fuse(&model, &ms, &hs, &pca, FuseMode::Reduced).unwrap();
        assert_eq!(full.fused, reduced.fused);
    }

    #[test]
    fn tiled_prediction_matches_whole_image() {
        let (ms, hs) = pair();
        let (model, pca) = fit(&ms, &hs, &small_cfg()).unwrap();
        let whole = fuse(&model, &ms, &hs, &pca, FuseMode::Full).unwrap();
        for tile in [5, 8, 13] {
            let tiled = fuse_tiled(&model, &ms, &hs, &pca, FuseMode::Full, Some(tile)).unwrap();
            let err = whole
                .fused
                .as_slice()
                .iter()
                .zip(tiled.fused.as_slice())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-10, "tile {tile}: {err}");
        }
    }

    #[test]
    fn model_file_round_trip() {
        let (ms, hs) = pair();
        let (model, _) = fit(&ms, &hs, &small_cfg()).unwrap();
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"HSFM");
        let back = TrainedModel::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.scale, model.scale);
        assert_eq!(back.config, model.config);
        assert!(TrainedModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(matches!(
            TrainedModel::from_bytes(b"HSC1xxxxxxxxxxxxxxx"),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn mode_names() {
        assert_eq!("reduced".parse::<FuseMode>().unwrap(), FuseMode::Reduced);
        assert_eq!(FuseMode::Full.to_string(), "full");
        assert!("half".parse::<FuseMode>().is_err());
    }
}
