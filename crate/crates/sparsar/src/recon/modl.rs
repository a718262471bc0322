//! Unrolled alternating reconstruction.
//!
//! Starting from the matched-filter image, each unroll denoises the current
//! estimate and re-solves the regularized normal equations
//! `(H H* + lambda I) x = H(S) + lambda z` by conjugate gradients; weights
//! are shared across unrolls. The lambda placement follows the converged
//! data-consistency form (rhs carries `lambda z`, the operator carries
//! `lambda I`).

use crate::error::Result;
use crate::operators::{csa_image, normal_apply_raw, CsaFilters, NuftPlan};
use crate::recon::cg::cg_solve;
use crate::recon::denoiser::{denoiser_apply_data, DenoiserModel};
use crate::sar::{EchoMatrix, ReflectivityMap};

/// Unroll and data-consistency hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct ModlConfig {
    /// Number of unrolled alternations K.
    pub unroll_count: usize,
    /// CG iterations per data-consistency solve.
    pub cg_iterations: usize,
    /// CG relative-residual stopping tolerance (the iteration cap usually
    /// binds first).
    pub cg_tolerance: f64,
    /// Regularization weight; trainable when driven by the training loop.
    pub lambda: f64,
}

impl Default for ModlConfig {
    fn default() -> Self {
        ModlConfig { unroll_count: 5, cg_iterations: 10, cg_tolerance: 1e-10, lambda: 1.0 }
    }
}

impl ModlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.unroll_count == 0 {
            return Err(crate::Error::InvalidParameter("unroll_count must be >= 1".into()));
        }
        if self.cg_iterations == 0 {
            return Err(crate::Error::InvalidParameter("cg_iterations must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(crate::Error::InvalidParameter(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Reconstruct a scene from (possibly undersampled) raw data by K unrolls of
/// denoise + CG data consistency, sharing weights across unrolls.
pub fn modl_reconstruct(
    echo: &EchoMatrix,
    filters: &CsaFilters,
    plan: &NuftPlan,
    model: &DenoiserModel,
    config: &ModlConfig,
) -> Result<ReflectivityMap> {
    config.validate()?;
    model.validate()?;
    let b0 = csa_image(filters, plan, echo)?;
    let lambda = config.lambda;
    let mut sigma = b0.data.clone();
    for _ in 0..config.unroll_count {
        let z = denoiser_apply_data(model, &sigma);
        let rhs = &b0.data + &z.mapv(|v| v * lambda);
        sigma = cg_solve(
            |x| normal_apply_raw(filters, plan, lambda, x).expect("validated dimensions"),
            &rhs,
            config.cg_iterations,
            config.cg_tolerance,
        )?;
    }
    ReflectivityMap::new(sigma, b0.azimuth_spacing, b0.range_spacing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::make_csa_filters;
    use crate::sar::{default_fast_time_grid, uniform_azimuth_times, SarParams, DEFAULT_REFERENCE_RANGE};
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_setup(n: usize) -> (SarParams, NuftPlan, CsaFilters) {
        let p = SarParams::default().validated().unwrap();
        let times = uniform_azimuth_times(&p, n);
        let plan = NuftPlan::new(&times, n, p.prf).unwrap();
        let grid = default_fast_time_grid(&p, n, DEFAULT_REFERENCE_RANGE);
        let filters = make_csa_filters(&p, &plan, &grid, DEFAULT_REFERENCE_RANGE).unwrap();
        (p, plan, filters)
    }

    fn random_scene(p: &SarParams, seed: u64, n: usize) -> ReflectivityMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ReflectivityMap::new(
            Array2::from_shape_fn((n, n), |_| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            }),
            p.azimuth_spacing(),
            p.range_spacing(),
        )
        .unwrap()
    }

    #[test]
    fn identity_denoiser_small_lambda_recovers_mf_image() {
        let n = 32;
        let (p, plan, filters) = uniform_setup(n);
        let scene = random_scene(&p, 8, n);
        let echo = crate::operators::csa_inverse(&filters, &plan, &scene).unwrap();
        let mf = csa_image(&filters, &plan, &echo).unwrap();
        let model = DenoiserModel::zeros(2, 4, true).unwrap();
        let config = ModlConfig { unroll_count: 3, cg_iterations: 20, cg_tolerance: 1e-14, lambda: 1e-9 };
        let out = modl_reconstruct(&echo, &filters, &plan, &model, &config).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in out.data.iter().zip(mf.data.iter()) {
            num += (a - b).norm_sqr();
            den += b.norm_sqr();
        }
        assert!(num.sqrt() <= 1e-6 * den.sqrt());
    }

    #[test]
    fn identity_denoiser_unrolls_hold_a_fixed_point() {
        // Uniform full sampling: H H* = I, so the first data-consistency
        // output is already the fixed point of the identity denoiser.
        let n = 24;
        let (p, plan, filters) = uniform_setup(n);
        let scene = random_scene(&p, 4, n);
        let echo = crate::operators::csa_inverse(&filters, &plan, &scene).unwrap();
        let model = DenoiserModel::zeros(2, 4, true).unwrap();
        let base = ModlConfig { unroll_count: 1, cg_iterations: 10, cg_tolerance: 1e-12, lambda: 0.7 };
        let one = modl_reconstruct(&echo, &filters, &plan, &model, &base).unwrap();
        let five = modl_reconstruct(
            &echo,
            &filters,
            &plan,
            &model,
            &ModlConfig { unroll_count: 5, ..base },
        )
        .unwrap();
        let mut worst = 0.0f64;
        for (a, b) in five.data.iter().zip(one.data.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst < 1e-10, "sigma_5 deviates from sigma_1 by {worst}");
    }

    #[test]
    fn reconstruction_is_deterministic() {
        let n = 16;
        let (p, plan, filters) = uniform_setup(n);
        let scene = random_scene(&p, 15, n);
        let echo = crate::operators::csa_inverse(&filters, &plan, &scene).unwrap();
        let model = DenoiserModel::residual_cnn(3, 6, 42).unwrap();
        let config = ModlConfig::default();
        let a = modl_reconstruct(&echo, &filters, &plan, &model, &config).unwrap();
        let b = modl_reconstruct(&echo, &filters, &plan, &model, &config).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn output_energy_stays_bounded() {
        let n = 16;
        let (p, plan, filters) = uniform_setup(n);
        for seed in 0..5 {
            let scene = random_scene(&p, seed, n);
            let echo = crate::operators::csa_inverse(&filters, &plan, &scene).unwrap();
            let mf = csa_image(&filters, &plan, &echo).unwrap();
            let model = DenoiserModel::residual_cnn(4, 8, seed).unwrap();
            let out = modl_reconstruct(&echo, &filters, &plan, &model, &ModlConfig::default()).unwrap();
            let out_norm = out.energy().sqrt();
            let mf_norm = mf.energy().sqrt();
            assert!(out_norm.is_finite());
            assert!(out_norm <= 10.0 * mf_norm, "{out_norm} vs {mf_norm}");
        }
    }
}
