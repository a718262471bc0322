//! Sparse stripmap-SAR imaging toolkit.
//!
//! The crate covers the full pipeline for studying azimuth undersampling:
//!
//! * [`sar`] — geometry, raw-echo simulation, and the explicit tiny-instance
//!   measurement matrix used as a brute-force oracle;
//! * [`sampling`] — azimuth sampling patterns (uniform, Poisson-disk,
//!   staggered, trainable) with constraint projection and statistics;
//! * [`operators`] — the nonuniform chirp-scaling operator pair mapping raw
//!   data to images and back, built from nonuniform azimuth DFT matrices and
//!   three unit-modulus phase filters;
//! * [`recon`] — conjugate-gradient data consistency, a small residual CNN
//!   denoiser, the unrolled alternating reconstruction, and a
//!   soft-thresholding baseline;
//! * [`training`] — analytic backpropagation through the unrolled network
//!   (including the sampling positions) with finite-difference verification
//!   and a joint pattern/weights trainer;
//! * [`metrics`] — SSIM and PSNR image quality scores.

pub mod error;
pub mod fft;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod recon;
pub mod sampling;
pub mod sar;
pub mod training;

pub use error::{Error, Result};
