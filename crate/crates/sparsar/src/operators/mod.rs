//! The nonuniform matched-filter operator pair.
//!
//! `csa_image` maps raw data to a focused image by a chirp-scaling chain
//! whose azimuth transform is a nonuniform DFT evaluated at the actual pulse
//! times; `csa_inverse` is its conjugate-reversed chain and doubles as the
//! forward model mapping a scene to the raw data it would produce. All three
//! phase filters are unit modulus, so the pair is exactly mutually inverse
//! whenever the azimuth transform pair is (uniform sampling at full budget),
//! and `csa_inverse` is the exact adjoint of `csa_image` in the standard
//! inner product.

mod csa;
mod nuft;

pub use csa::{
    csa_image, csa_inverse, make_csa_filters, migration_factor, normal_apply, CsaFilters,
};
pub use nuft::{
    nuft_forward, nuft_forward_position_grad, nuift_inverse, nuift_inverse_position_grad,
    NuftPlan,
};

pub(crate) use csa::{
    csa_image_raw_with_tape, csa_image_vjp, csa_inverse_raw_with_tape, csa_inverse_vjp,
    normal_apply_raw, ImageTape,
};

use ndarray::Array2;
use num_complex::Complex64;

/// One recorded application of the nonuniform transform inside a
/// differentiated pipeline: the input it saw and the loss gradient at its
/// output. These are the only states needed to differentiate the loss with
/// respect to the sampling positions.
#[derive(Debug, Clone)]
pub struct NuftEvent {
    pub kind: NuftKind,
    pub input: Array2<Complex64>,
    pub upstream: Array2<Complex64>,
}

/// Which side of the transform pair an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuftKind {
    Forward,
    Inverse,
}
