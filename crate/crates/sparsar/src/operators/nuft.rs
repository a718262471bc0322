//! Nonuniform azimuth DFT pair.
//!
//! The forward transform evaluates the spectrum of the per-range-bin azimuth
//! signal at a uniform Doppler grid from samples taken at arbitrary times;
//! the inverse reverses sign and carries the 1/Na factor, so as matrices
//! NIF = NF^H / Na. Doppler bins are stored in the order `n * prf / Na`
//! (n = 0..Na), but bins at or above prf/2 are *evaluated* at the aliased
//! negative frequency, which keeps the uniform case identical to the
//! standard DFT and centers the band at zero Doppler for off-grid times.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Plan holding the sample times, Doppler grid, and the cached transform
/// matrices. Immutable after construction.
#[derive(Debug, Clone)]
pub struct NuftPlan {
    positions: Vec<f64>,
    doppler_bin_count: usize,
    prf: f64,
    baseband: Vec<f64>,
    forward: Array2<Complex64>,
    inverse: Array2<Complex64>,
}

impl NuftPlan {
    pub fn new(positions: &[f64], doppler_bin_count: usize, prf: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("plan needs at least one position".into()));
        }
        if doppler_bin_count == 0 {
            return Err(Error::InvalidParameter("doppler_bin_count must be >= 1".into()));
        }
        if !(prf > 0.0 && prf.is_finite()) {
            return Err(Error::InvalidParameter(format!("prf must be positive, got {prf}")));
        }
        for w in positions.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(
                    "plan positions must be strictly increasing".into(),
                ));
            }
        }
        if positions.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("plan position".into()));
        }
        let na = doppler_bin_count;
        let baseband: Vec<f64> = (0..na)
            .map(|n| {
                let f = n as f64 * prf / na as f64;
                if 2.0 * f >= prf {
                    f - prf
                } else {
                    f
                }
            })
            .collect();
        let m = positions.len();
        let mut forward = Array2::zeros((na, m));
        let mut inverse = Array2::zeros((m, na));
        for (mi, &eta) in positions.iter().enumerate() {
            for (n, &f) in baseband.iter().enumerate() {
                let phase = 2.0 * PI * eta * f;
                forward[[n, mi]] = Complex64::from_polar(1.0, -phase);
                inverse[[mi, n]] = Complex64::from_polar(1.0 / na as f64, phase);
            }
        }
        Ok(NuftPlan { positions: positions.to_vec(), doppler_bin_count, prf, baseband, forward, inverse })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of azimuth samples M.
    pub fn sample_count(&self) -> usize {
        self.positions.len()
    }

    /// Number of Doppler bins Na.
    pub fn doppler_bin_count(&self) -> usize {
        self.doppler_bin_count
    }

    pub fn prf(&self) -> f64 {
        self.prf
    }

    /// Doppler bin frequencies in storage order, `n * prf / Na`.
    pub fn doppler_frequencies(&self) -> Vec<f64> {
        (0..self.doppler_bin_count)
            .map(|n| n as f64 * self.prf / self.doppler_bin_count as f64)
            .collect()
    }

    /// Evaluation frequencies: storage order, wrapped into [-prf/2, prf/2).
    pub fn baseband_frequencies(&self) -> &[f64] {
        &self.baseband
    }

    /// The Na x M forward matrix.
    pub fn forward_matrix(&self) -> &Array2<Complex64> {
        &self.forward
    }

    /// The M x Na inverse matrix (= forward^H / Na).
    pub fn inverse_matrix(&self) -> &Array2<Complex64> {
        &self.inverse
    }
}

/// Azimuth samples -> Doppler bins, column-wise over range.
pub fn nuft_forward(plan: &NuftPlan, signal: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    if signal.nrows() != plan.sample_count() {
        return Err(Error::DimensionMismatch(format!(
            "nuft_forward: signal rows {} != plan samples {}",
            signal.nrows(),
            plan.sample_count()
        )));
    }
    Ok(plan.forward.dot(signal))
}

/// Doppler bins -> azimuth samples, column-wise over range.
pub fn nuift_inverse(plan: &NuftPlan, doppler: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    if doppler.nrows() != plan.doppler_bin_count() {
        return Err(Error::DimensionMismatch(format!(
            "nuift_inverse: signal rows {} != plan bins {}",
            doppler.nrows(),
            plan.doppler_bin_count()
        )));
    }
    Ok(plan.inverse.dot(doppler))
}

/// Loss gradient with respect to each sample time for one forward
/// application `Y = NF(X)`, given the loss gradient at `Y`.
///
/// Entry (n, m) of NF depends on position m through the factor
/// `exp(-j 2 pi eta_m f_n)`, so its derivative is the entry itself times
/// `-j 2 pi f_n`; the contraction below sums the resulting real sensitivity
/// over all Doppler bins and range columns.
pub fn nuft_forward_position_grad(
    plan: &NuftPlan,
    input: &Array2<Complex64>,
    upstream: &Array2<Complex64>,
) -> Result<Array1<f64>> {
    let m = plan.sample_count();
    let na = plan.doppler_bin_count();
    if input.nrows() != m || upstream.nrows() != na || input.ncols() != upstream.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "position grad (forward): input {:?}, upstream {:?}, plan {}x{}",
            input.dim(),
            upstream.dim(),
            na,
            m
        )));
    }
    // W[m, n] = sum_r X[m, r] * conj(G[n, r])
    let gh = upstream.t().mapv(|z| z.conj());
    let w = input.dot(&gh);
    let mut grad = Array1::zeros(m);
    for mi in 0..m {
        let mut acc = 0.0;
        for (n, &f) in plan.baseband.iter().enumerate() {
            let deriv = Complex64::new(0.0, -2.0 * PI * f) * plan.forward[[n, mi]];
            acc += (w[[mi, n]] * deriv).re;
        }
        grad[mi] = acc;
    }
    Ok(grad)
}

/// Loss gradient with respect to each sample time for one inverse
/// application `Y = NIF(X)`, given the loss gradient at `Y`.
pub fn nuift_inverse_position_grad(
    plan: &NuftPlan,
    input: &Array2<Complex64>,
    upstream: &Array2<Complex64>,
) -> Result<Array1<f64>> {
    let m = plan.sample_count();
    let na = plan.doppler_bin_count();
    if input.nrows() != na || upstream.nrows() != m || input.ncols() != upstream.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "position grad (inverse): input {:?}, upstream {:?}, plan {}x{}",
            input.dim(),
            upstream.dim(),
            m,
            na
        )));
    }
    // V[m, n] = sum_r conj(G[m, r]) * X[n, r]
    let xt = input.t();
    let v = upstream.mapv(|z| z.conj()).dot(&xt);
    let mut grad = Array1::zeros(m);
    for mi in 0..m {
        let mut acc = 0.0;
        for (n, &f) in plan.baseband.iter().enumerate() {
            let deriv = Complex64::new(0.0, 2.0 * PI * f) * plan.inverse[[mi, n]];
            acc += (v[[mi, n]] * deriv).re;
        }
        grad[mi] = acc;
    }
    Ok(grad)
}
