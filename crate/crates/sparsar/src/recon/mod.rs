//! Regularized reconstruction from undersampled raw data.
//!
//! The main path is the unrolled alternation of a learned residual-CNN
//! denoiser and a conjugate-gradient data-consistency solve on the
//! matched-filter normal equations; a classical soft-thresholding baseline
//! is kept alongside for comparison.

mod cg;
mod denoiser;
mod ista;
mod modl;
mod weights;

pub use cg::cg_solve;
pub use denoiser::{
    channels_to_complex, complex_to_channels, denoiser_apply, ConvLayer, DenoiserModel,
    LayerGrads, ModelGrads,
};
pub use ista::{ista_baseline, ista_objective, ista_step_bound};
pub use modl::{modl_reconstruct, ModlConfig};
pub use weights::{load_model, load_model_file, save_model, save_model_file};

pub(crate) use denoiser::{backward_network, forward_network};
