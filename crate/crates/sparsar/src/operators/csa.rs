//! Chirp-scaling filters and the imaging / inverse-imaging chains.
//!
//! Filter construction (broadside, reference Doppler = 0):
//!
//! * migration factor `D(f) = sqrt(1 - (lambda f / 2v)^2)`;
//! * range-Doppler coupled chirp rate
//!   `Km(f) = Kr / (1 - Kr lambda R_ref f^2 / (2 v^2 f0^2 D^3))`;
//! * `theta1` (chirp scaling, range-Doppler domain):
//!   `exp{ j pi Km (1/D - 1) (tau - 2 R_ref / (c D))^2 }`;
//! * `theta2` (range compression + bulk RCMC, 2-D frequency domain):
//!   `exp{ j pi D f_tau^2 / Km } * exp{ j 4 pi R_ref f_tau (1/D - 1) / c }`;
//! * `theta3` (azimuth compression + residual phase, range-Doppler domain):
//!   `exp{ j 4 pi R0 f0 D / c } * exp{ -j 4 pi Km (1 - D) (R0/c)^2 (1/D - 1) }`
//!   with `R0(tau) = c tau / 2`.
//!
//! Range frequencies follow the same baseband wrap as the Doppler bins. The
//! sign conventions are pinned by two oracles rather than by the formulas:
//! the uniform full-budget roundtrip must be the identity and a simulated
//! point target must focus at its true location.

use crate::error::{Error, Result};
use crate::fft;
use crate::operators::nuft::{nuft_forward, nuift_inverse, NuftPlan};
use crate::operators::{NuftEvent, NuftKind};
use crate::sar::{EchoMatrix, ReflectivityMap, SarParams};
use ndarray::Array2;
use num_complex::Complex64;
use std::f64::consts::PI;

/// The three unit-modulus chirp-scaling filters plus the grid metadata
/// needed to label operator outputs. Immutable after construction.
#[derive(Debug, Clone)]
pub struct CsaFilters {
    /// Chirp-scaling phase, range-Doppler domain, Na x Nr.
    pub theta1: Array2<Complex64>,
    /// Range compression + bulk RCMC, 2-D frequency domain, Na x Nr.
    pub theta2: Array2<Complex64>,
    /// Azimuth compression + residual phase, range-Doppler domain, Na x Nr.
    pub theta3: Array2<Complex64>,
    /// Reference slant range (m).
    pub reference_range: f64,
    fast_time_origin: f64,
    fast_time_step: f64,
    azimuth_spacing: f64,
    range_spacing: f64,
}

impl CsaFilters {
    pub fn doppler_bins(&self) -> usize {
        self.theta1.nrows()
    }

    pub fn range_samples(&self) -> usize {
        self.theta1.ncols()
    }

    pub fn fast_time_origin(&self) -> f64 {
        self.fast_time_origin
    }

    pub fn fast_time_step(&self) -> f64 {
        self.fast_time_step
    }

    pub fn azimuth_spacing(&self) -> f64 {
        self.azimuth_spacing
    }

    pub fn range_spacing(&self) -> f64 {
        self.range_spacing
    }
}

/// Cosine-of-squint migration factor `sqrt(1 - (lambda f / 2v)^2)`; the
/// argument of the root goes non-positive for evanescent Doppler bins.
pub fn migration_factor(wavelength: f64, velocity: f64, f_eta: f64) -> f64 {
    let ratio = wavelength * f_eta / (2.0 * velocity);
    (1.0 - ratio * ratio).sqrt()
}

/// Build the three filters on the Doppler grid of `plan` and the given
/// fast-time grid.
pub fn make_csa_filters(
    params: &SarParams,
    plan: &NuftPlan,
    fast_time_grid: &[f64],
    reference_range: f64,
) -> Result<CsaFilters> {
    if fast_time_grid.is_empty() {
        return Err(Error::InvalidParameter("fast_time_grid must be non-empty".into()));
    }
    if !(reference_range > 0.0 && reference_range.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "reference_range must be positive, got {reference_range}"
        )));
    }
    let dt = params.fast_time_step();
    for w in fast_time_grid.windows(2) {
        if ((w[1] - w[0]) / dt - 1.0).abs() > 1e-9 {
            return Err(Error::GridMismatch("fast_time_grid step differs from 1/fs".into()));
        }
    }
    let na = plan.doppler_bin_count();
    let nr = fast_time_grid.len();
    let c = params.speed_of_light;
    let f0 = params.carrier_frequency;
    let lambda = params.wavelength;
    let v = params.platform_velocity;
    let kr = params.range_chirp_rate;
    let fs = params.range_sampling_rate;

    let mut theta1 = Array2::zeros((na, nr));
    let mut theta2 = Array2::zeros((na, nr));
    let mut theta3 = Array2::zeros((na, nr));
    for (n, &f_eta) in plan.baseband_frequencies().iter().enumerate() {
        let d = migration_factor(lambda, v, f_eta);
        if !(d > 0.0) {
            return Err(Error::EvanescentDoppler { d, f_eta });
        }
        let km = kr
            / (1.0
                - kr * lambda * reference_range * f_eta * f_eta
                    / (2.0 * v * v * f0 * f0 * d * d * d));
        let scaled_delay = 2.0 * reference_range / (c * d);
        for k in 0..nr {
            let tau = fast_time_grid[k];
            let dt_ref = tau - scaled_delay;
            theta1[[n, k]] =
                Complex64::from_polar(1.0, PI * km * (1.0 / d - 1.0) * dt_ref * dt_ref);

            let f_tau_raw = k as f64 * fs / nr as f64;
            let f_tau = if 2.0 * f_tau_raw >= fs { f_tau_raw - fs } else { f_tau_raw };
            let phase2 = PI * d * f_tau * f_tau / km
                + 4.0 * PI * reference_range * f_tau * (1.0 / d - 1.0) / c;
            theta2[[n, k]] = Complex64::from_polar(1.0, phase2);

            let r0 = c * tau / 2.0;
            let phase3 = 4.0 * PI * r0 * f0 * d / c
                - 4.0 * PI * km * (1.0 - d) * (r0 / c) * (r0 / c) * (1.0 / d - 1.0);
            theta3[[n, k]] = Complex64::from_polar(1.0, phase3);
        }
    }
    Ok(CsaFilters {
        theta1,
        theta2,
        theta3,
        reference_range,
        fast_time_origin: fast_time_grid[0],
        fast_time_step: dt,
        azimuth_spacing: params.azimuth_spacing(),
        range_spacing: params.range_spacing(),
    })
}

fn check_echo_data(filters: &CsaFilters, plan: &NuftPlan, data: &Array2<Complex64>) -> Result<()> {
    if data.nrows() != plan.sample_count() || data.ncols() != filters.range_samples() {
        return Err(Error::DimensionMismatch(format!(
            "echo {}x{} vs plan M={} and filters Nr={}",
            data.nrows(),
            data.ncols(),
            plan.sample_count(),
            filters.range_samples()
        )));
    }
    Ok(())
}

fn check_echo(filters: &CsaFilters, plan: &NuftPlan, echo: &EchoMatrix) -> Result<()> {
    check_echo_data(filters, plan, &echo.data)?;
    for (a, b) in echo.azimuth_times.iter().zip(plan.positions().iter()) {
        if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
            return Err(Error::DimensionMismatch(format!(
                "echo azimuth time {a} does not match plan position {b}"
            )));
        }
    }
    let t0 = filters.fast_time_origin;
    if (echo.fast_time_origin - t0).abs() > 1e-12 * (1.0 + t0.abs()) {
        return Err(Error::GridMismatch(format!(
            "echo fast-time origin {} does not match filters ({})",
            echo.fast_time_origin, t0
        )));
    }
    Ok(())
}

fn check_scene_data(filters: &CsaFilters, plan: &NuftPlan, data: &Array2<Complex64>) -> Result<()> {
    if data.nrows() != plan.doppler_bin_count() || data.ncols() != filters.range_samples() {
        return Err(Error::DimensionMismatch(format!(
            "scene {}x{} vs Na={} and Nr={}",
            data.nrows(),
            data.ncols(),
            plan.doppler_bin_count(),
            filters.range_samples()
        )));
    }
    Ok(())
}

/// Raw imaging chain on an echo data array (no sample-time bookkeeping).
pub(crate) fn csa_image_raw(
    filters: &CsaFilters,
    plan: &NuftPlan,
    data: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    check_echo_data(filters, plan, data)?;
    let mut rd = nuft_forward(plan, data)?;
    rd *= &filters.theta1;
    fft::fft_rows(&mut rd, false);
    rd *= &filters.theta2;
    fft::fft_rows(&mut rd, true);
    rd *= &filters.theta3;
    fft::fft_cols(&mut rd, true);
    Ok(rd)
}

/// Focus raw data into a scene estimate (echo -> image).
pub fn csa_image(filters: &CsaFilters, plan: &NuftPlan, echo: &EchoMatrix) -> Result<ReflectivityMap> {
    check_echo(filters, plan, echo)?;
    let data = csa_image_raw(filters, plan, &echo.data)?;
    ReflectivityMap::new(data, filters.azimuth_spacing, filters.range_spacing)
}

fn inverse_chain_to_rd(filters: &CsaFilters, data: &Array2<Complex64>) -> Array2<Complex64> {
    let mut a = data.clone();
    fft::fft_cols(&mut a, false);
    ndarray::Zip::from(&mut a).and(&filters.theta3).for_each(|x, t| *x *= t.conj());
    fft::fft_rows(&mut a, false);
    ndarray::Zip::from(&mut a).and(&filters.theta2).for_each(|x, t| *x *= t.conj());
    fft::fft_rows(&mut a, true);
    ndarray::Zip::from(&mut a).and(&filters.theta1).for_each(|x, t| *x *= t.conj());
    a
}

/// Raw inverse chain on a scene data array.
pub(crate) fn csa_inverse_raw(
    filters: &CsaFilters,
    plan: &NuftPlan,
    data: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    check_scene_data(filters, plan, data)?;
    let rd = inverse_chain_to_rd(filters, data);
    nuift_inverse(plan, &rd)
}

/// Synthesize the raw data a scene would produce (image -> echo); the
/// conjugate-reversed chain of [`csa_image`] and its exact adjoint.
pub fn csa_inverse(filters: &CsaFilters, plan: &NuftPlan, scene: &ReflectivityMap) -> Result<EchoMatrix> {
    let data = csa_inverse_raw(filters, plan, &scene.data)?;
    EchoMatrix::new(data, plan.positions().to_vec(), filters.fast_time_origin)
}

/// Raw regularized normal operator `(H H* + lambda I)` on an image array.
pub(crate) fn normal_apply_raw(
    filters: &CsaFilters,
    plan: &NuftPlan,
    lambda: f64,
    data: &Array2<Complex64>,
) -> Result<Array2<Complex64>> {
    let echo = csa_inverse_raw(filters, plan, data)?;
    let mut out = csa_image_raw(filters, plan, &echo)?;
    ndarray::Zip::from(&mut out).and(data).for_each(|o, i| *o += i * lambda);
    Ok(out)
}

/// Apply the regularized normal operator `(H H* + lambda I)` to an image.
pub fn normal_apply(
    filters: &CsaFilters,
    plan: &NuftPlan,
    lambda: f64,
    image: &ReflectivityMap,
) -> Result<ReflectivityMap> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let data = normal_apply_raw(filters, plan, lambda, &image.data)?;
    ReflectivityMap::new(data, filters.azimuth_spacing, filters.range_spacing)
}

/// State captured by one taped imaging application.
#[derive(Debug, Clone)]
pub struct ImageTape {
    nf_input: Array2<Complex64>,
}

/// State captured by one taped inverse application.
#[derive(Debug, Clone)]
pub struct InverseTape {
    nif_input: Array2<Complex64>,
}

/// Imaging chain that also captures the state needed for its backward pass.
pub(crate) fn csa_image_raw_with_tape(
    filters: &CsaFilters,
    plan: &NuftPlan,
    data: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, ImageTape)> {
    let out = csa_image_raw(filters, plan, data)?;
    Ok((out, ImageTape { nf_input: data.clone() }))
}

/// Backward pass of the imaging chain: maps the loss gradient at the image
/// to the loss gradient at the echo and records the transform application
/// for position gradients. Because the inverse chain is the exact adjoint,
/// the returned echo gradient equals `csa_inverse(upstream)`.
pub(crate) fn csa_image_vjp(
    filters: &CsaFilters,
    plan: &NuftPlan,
    tape: &ImageTape,
    upstream: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, NuftEvent)> {
    let na = plan.doppler_bin_count() as f64;
    let nr = filters.range_samples() as f64;
    let mut g = upstream.clone();
    // adjoint of the azimuth IFFT
    fft::fft_cols_raw(&mut g, false);
    g.mapv_inplace(|z| z / na);
    ndarray::Zip::from(&mut g).and(&filters.theta3).for_each(|x, t| *x *= t.conj());
    // adjoint of the range IFFT
    fft::fft_rows_raw(&mut g, false);
    g.mapv_inplace(|z| z / nr);
    ndarray::Zip::from(&mut g).and(&filters.theta2).for_each(|x, t| *x *= t.conj());
    // adjoint of the range FFT
    fft::fft_rows_raw(&mut g, true);
    ndarray::Zip::from(&mut g).and(&filters.theta1).for_each(|x, t| *x *= t.conj());
    // g now sits at the NF output.
    let event =
        NuftEvent { kind: NuftKind::Forward, input: tape.nf_input.clone(), upstream: g.clone() };
    let echo_grad = nuift_inverse(plan, &g)?.mapv(|z| z * na);
    Ok((echo_grad, event))
}

/// Inverse chain that also captures the state needed for its backward pass.
pub(crate) fn csa_inverse_raw_with_tape(
    filters: &CsaFilters,
    plan: &NuftPlan,
    data: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, InverseTape)> {
    check_scene_data(filters, plan, data)?;
    let rd = inverse_chain_to_rd(filters, data);
    let out = nuift_inverse(plan, &rd)?;
    Ok((out, InverseTape { nif_input: rd }))
}

/// Backward pass of the inverse chain: maps the loss gradient at the echo to
/// the loss gradient at the scene (equal to `csa_image(upstream)` by
/// adjointness) and records the transform application.
pub(crate) fn csa_inverse_vjp(
    filters: &CsaFilters,
    plan: &NuftPlan,
    tape: &InverseTape,
    upstream: &Array2<Complex64>,
) -> Result<(Array2<Complex64>, NuftEvent)> {
    let na = plan.doppler_bin_count() as f64;
    let nr = filters.range_samples() as f64;
    let event = NuftEvent {
        kind: NuftKind::Inverse,
        input: tape.nif_input.clone(),
        upstream: upstream.clone(),
    };
    let mut g = nuft_forward(plan, upstream)?;
    g.mapv_inplace(|z| z / na);
    ndarray::Zip::from(&mut g).and(&filters.theta1).for_each(|x, t| *x *= *t);
    fft::fft_rows_raw(&mut g, false);
    g.mapv_inplace(|z| z / nr);
    ndarray::Zip::from(&mut g).and(&filters.theta2).for_each(|x, t| *x *= *t);
    fft::fft_rows_raw(&mut g, true);
    ndarray::Zip::from(&mut g).and(&filters.theta3).for_each(|x, t| *x *= *t);
    fft::fft_cols_raw(&mut g, true);
    Ok((g, event))
}
