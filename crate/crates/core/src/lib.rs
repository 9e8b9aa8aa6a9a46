//! Hyperspectral / multispectral image fusion with a PCA-domain 3-D CNN.

// `!(x > y)` is used on purpose so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cube;
pub mod error;
pub mod experiment;
mod gemm;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod resample;
pub mod simulate;

pub use cube::{read_cube, slice_bands, stack, write_cube, ImageCube};
pub use error::{Error, Result};
pub use linalg::{pca_decompose, reconstruct_full, reconstruct_reduced, PcaModel};
pub use pipeline::{
    fit, fuse, prepare_training_set, train, FuseMode, FusionResult, TrainConfig, TrainedModel,
};
