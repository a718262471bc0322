//! Small residual CNN operating on stacked real/imaginary planes.
//!
//! Complex images enter as a 2-channel real tensor, pass through 3x3
//! same-padded convolutions with ReLU between layers, and the network output
//! is subtracted from the input when the residual flag is set (the network
//! then learns the artifact, not the image). The forward and backward passes
//! are hand-rolled so the whole pipeline stays differentiable without a
//! framework.

use crate::error::{Error, Result};
use crate::sar::ReflectivityMap;
use ndarray::{Array1, Array2, Array3, Array4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One 3x3 convolution layer (zero same-padding) with optional ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// Kernels indexed `[out_channel][in_channel][ky][kx]`.
    pub weights: Array4<f64>,
    /// One bias per output channel.
    pub bias: Array1<f64>,
    /// Apply ReLU after the convolution.
    pub relu: bool,
}

impl ConvLayer {
    pub fn out_channels(&self) -> usize {
        self.weights.dim().0
    }

    pub fn in_channels(&self) -> usize {
        self.weights.dim().1
    }
}

/// Denoiser weights: a stack of conv layers plus the residual flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    pub layers: Vec<ConvLayer>,
    pub residual: bool,
}

impl DenoiserModel {
    /// Validate channel chaining and kernel geometry.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("denoiser needs at least one layer".into()));
        }
        if self.layers[0].in_channels() != 2 {
            return Err(Error::InvalidParameter(format!(
                "first layer must take 2 channels, takes {}",
                self.layers[0].in_channels()
            )));
        }
        if self.layers.last().unwrap().out_channels() != 2 {
            return Err(Error::InvalidParameter(format!(
                "last layer must emit 2 channels, emits {}",
                self.layers.last().unwrap().out_channels()
            )));
        }
        let mut channels = 2;
        for (i, layer) in self.layers.iter().enumerate() {
            let (o, c, kh, kw) = layer.weights.dim();
            if kh != 3 || kw != 3 {
                return Err(Error::InvalidParameter(format!("layer {i} kernel must be 3x3")));
            }
            if c != channels {
                return Err(Error::InvalidParameter(format!(
                    "layer {i} expects {channels} channels, takes {c}"
                )));
            }
            if layer.bias.len() != o {
                return Err(Error::InvalidParameter(format!(
                    "layer {i} bias length {} != out channels {o}",
                    layer.bias.len()
                )));
            }
            channels = o;
        }
        Ok(())
    }

    /// Residual CNN of `depth` conv layers and `width` hidden channels, with
    /// small seeded He-scaled initial weights and zero biases.
    pub fn residual_cnn(depth: usize, width: usize, seed: u64) -> Result<Self> {
        if depth == 0 || width == 0 {
            return Err(Error::InvalidParameter("depth and width must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(depth);
        for i in 0..depth {
            let in_c = if i == 0 { 2 } else { width };
            let out_c = if i + 1 == depth { 2 } else { width };
            let std = 0.1 * (2.0 / (in_c as f64 * 9.0)).sqrt();
            let weights = Array4::from_shape_fn((out_c, in_c, 3, 3), |_| {
                (rng.gen::<f64>() * 2.0 - 1.0) * std
            });
            layers.push(ConvLayer {
                weights,
                bias: Array1::zeros(out_c),
                relu: i + 1 != depth,
            });
        }
        let model = DenoiserModel { layers, residual: true };
        model.validate()?;
        Ok(model)
    }

    /// All-zero weights: with the residual flag this is the identity map.
    pub fn zeros(depth: usize, width: usize, residual: bool) -> Result<Self> {
        let mut model = Self::residual_cnn(depth.max(1), width.max(1), 0)?;
        for layer in &mut model.layers {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
        model.residual = residual;
        Ok(model)
    }

    /// Total number of scalar parameters.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// Gradients for one layer, same shapes as the layer.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub d_weights: Array4<f64>,
    pub d_bias: Array1<f64>,
}

/// Gradients for a whole model.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub layers: Vec<LayerGrads>,
}

impl ModelGrads {
    pub fn zeros_like(model: &DenoiserModel) -> Self {
        ModelGrads {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: Array4::zeros(l.weights.dim()),
                    d_bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &ModelGrads) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            a.d_weights += &b.d_weights;
            a.d_bias += &b.d_bias;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.d_weights.iter().chain(l.d_bias.iter()))
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

/// Split a complex raster into a (2, H, W) real tensor.
pub fn complex_to_channels(data: &Array2<Complex64>) -> Array3<f64> {
    let (h, w) = data.dim();
    Array3::from_shape_fn((2, h, w), |(c, i, j)| {
        if c == 0 {
            data[[i, j]].re
        } else {
            data[[i, j]].im
        }
    })
}

/// Rebuild a complex raster from a (2, H, W) real tensor.
pub fn channels_to_complex(data: &Array3<f64>) -> Array2<Complex64> {
    let (_, h, w) = data.dim();
    Array2::from_shape_fn((h, w), |(i, j)| Complex64::new(data[[0, i, j]], data[[1, i, j]]))
}

fn conv_forward(input: &Array3<f64>, layer: &ConvLayer) -> Array3<f64> {
    let (_, h, w) = input.dim();
    let (oc, ic, _, _) = layer.weights.dim();
    let mut out = Array3::zeros((oc, h, w));
    for o in 0..oc {
        let b = layer.bias[o];
        for i in 0..h {
            for j in 0..w {
                let mut acc = b;
                for c in 0..ic {
                    for u in 0..3usize {
                        let y = i as isize + u as isize - 1;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        for v in 0..3usize {
                            let x = j as isize + v as isize - 1;
                            if x < 0 || x >= w as isize {
                                continue;
                            }
                            acc += layer.weights[[o, c, u, v]] * input[[c, y as usize, x as usize]];
                        }
                    }
                }
                out[[o, i, j]] = acc;
            }
        }
    }
    out
}

/// Per-layer inputs and pre-activation outputs kept for the backward pass.
pub(crate) struct ForwardCache {
    inputs: Vec<Array3<f64>>,
    preacts: Vec<Array3<f64>>,
}

/// Run the conv stack on a (2, H, W) tensor; returns the network output
/// (before any residual combination) and the cache.
pub(crate) fn forward_network(model: &DenoiserModel, input: &Array3<f64>) -> (Array3<f64>, ForwardCache) {
    let mut cache = ForwardCache { inputs: Vec::new(), preacts: Vec::new() };
    let mut x = input.clone();
    for layer in &model.layers {
        cache.inputs.push(x.clone());
        let pre = conv_forward(&x, layer);
        cache.preacts.push(pre.clone());
        x = if layer.relu { pre.mapv(|v| v.max(0.0)) } else { pre };
    }
    (x, cache)
}

/// Backward pass through the conv stack: upstream is the gradient at the
/// network output; returns per-layer gradients and the gradient at the input.
pub(crate) fn backward_network(
    model: &DenoiserModel,
    cache: &ForwardCache,
    upstream: &Array3<f64>,
) -> (ModelGrads, Array3<f64>) {
    let mut grads = ModelGrads::zeros_like(model);
    let mut g = upstream.clone();
    for (idx, layer) in model.layers.iter().enumerate().rev() {
        if layer.relu {
            let pre = &cache.preacts[idx];
            ndarray::Zip::from(&mut g).and(pre).for_each(|gi, &p| {
                if p <= 0.0 {
                    *gi = 0.0;
                }
            });
        }
        let input = &cache.inputs[idx];
        let (oc, ic, _, _) = layer.weights.dim();
        let (_, h, w) = input.dim();
        let lg = &mut grads.layers[idx];
        let mut g_in = Array3::zeros((ic, h, w));
        for o in 0..oc {
            let mut db = 0.0;
            for i in 0..h {
                for j in 0..w {
                    let go = g[[o, i, j]];
                    if go == 0.0 {
                        continue;
                    }
                    db += go;
                    for c in 0..ic {
                        for u in 0..3usize {
                            let y = i as isize + u as isize - 1;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            for v in 0..3usize {
                                let x = j as isize + v as isize - 1;
                                if x < 0 || x >= w as isize {
                                    continue;
                                }
                                lg.d_weights[[o, c, u, v]] +=
                                    go * input[[c, y as usize, x as usize]];
                                g_in[[c, y as usize, x as usize]] +=
                                    go * layer.weights[[o, c, u, v]];
                            }
                        }
                    }
                }
            }
            lg.d_bias[o] += db;
        }
        g = g_in;
    }
    (grads, g)
}

/// Apply the denoiser to a complex image; shape is preserved.
pub fn denoiser_apply(model: &DenoiserModel, image: &ReflectivityMap) -> Result<ReflectivityMap> {
    model.validate()?;
    let out = denoiser_apply_data(model, &image.data);
    ReflectivityMap::new(out, image.azimuth_spacing, image.range_spacing)
}

pub(crate) fn denoiser_apply_data(model: &DenoiserModel, data: &Array2<Complex64>) -> Array2<Complex64> {
    let stacked = complex_to_channels(data);
    let (net, _) = forward_network(model, &stacked);
    let combined = if model.residual { &stacked - &net } else { net };
    channels_to_complex(&combined)
}
