//! Iterative soft-thresholding baseline on the matched-filter normal
//! equations: minimizes `|| S - H*(x) ||^2 + lambda_l1 ||x||_1` with
//! magnitude shrinkage on the complex image.

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{csa_image, csa_inverse, normal_apply, CsaFilters, NuftPlan};
use crate::sar::{EchoMatrix, ReflectivityMap};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Objective of the L1-regularized least-squares problem at `x`.
pub fn ista_objective(
    echo: &EchoMatrix,
    filters: &CsaFilters,
    plan: &NuftPlan,
    lambda_l1: f64,
    x: &ReflectivityMap,
) -> Result<f64> {
    let synth = csa_inverse(filters, plan, x)?;
    let data_term: f64 = echo
        .data
        .iter()
        .zip(synth.data.iter())
        .map(|(s, y)| (s - y).norm_sqr())
        .sum();
    let l1: f64 = x.data.iter().map(|z| z.norm()).sum();
    Ok(data_term + lambda_l1 * l1)
}

/// Largest admissible gradient step `1 / (2 lambda_max(H H*))`, with the
/// spectral norm estimated by power iteration on the normal operator.
pub fn ista_step_bound(filters: &CsaFilters, plan: &NuftPlan) -> Result<f64> {
    let na = plan.doppler_bin_count();
    let nr = filters.range_samples();
    let az = filters.azimuth_spacing();
    let rg = filters.range_spacing();
    let lambda_max = linalg::power_iteration(
        na * nr,
        |v| {
            let data = Array2::from_shape_fn((na, nr), |(a, r)| v[a * nr + r]);
            let map = ReflectivityMap::new(data, az, rg).expect("valid raster");
            let out = normal_apply(filters, plan, 0.0, &map).expect("validated dims");
            Array1::from_shape_fn(na * nr, |i| out.data[[i / nr, i % nr]])
        },
        60,
        0,
    );
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidParameter(
            "power iteration found no positive spectral norm".into(),
        ));
    }
    Ok(1.0 / (2.0 * lambda_max))
}

fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let mag = z.norm();
    if mag <= t {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((mag - t) / mag)
    }
}

/// Run ISTA from a zero image. The step must respect the stability bound
/// (checked against a power-iteration estimate) and the objective is
/// asserted non-increasing within a small slack at every iteration.
pub fn ista_baseline(
    echo: &EchoMatrix,
    filters: &CsaFilters,
    plan: &NuftPlan,
    lambda_l1: f64,
    step: f64,
    iterations: usize,
) -> Result<ReflectivityMap> {
    if !(lambda_l1 >= 0.0 && lambda_l1.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda_l1 must be >= 0, got {lambda_l1}")));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be >= 1".into()));
    }
    let bound = ista_step_bound(filters, plan)?;
    if step > bound * (1.0 + 1e-9) || !(step > 0.0) {
        return Err(Error::StepTooLarge { step, bound });
    }
    let b0 = csa_image(filters, plan, echo)?;
    let mut x = ReflectivityMap::new(
        Array2::zeros(b0.data.dim()),
        b0.azimuth_spacing,
        b0.range_spacing,
    )?;
    let mut objective = ista_objective(echo, filters, plan, lambda_l1, &x)?;
    for iteration in 0..iterations {
        let normal = normal_apply(filters, plan, 0.0, &x)?;
        let threshold = step * lambda_l1;
        let next = Array2::from_shape_fn(x.data.dim(), |(a, r)| {
            let grad = 2.0 * (normal.data[[a, r]] - b0.data[[a, r]]);
            soft_threshold(x.data[[a, r]] - grad * step, threshold)
        });
        x = ReflectivityMap::new(next, x.azimuth_spacing, x.range_spacing)?;
        let new_objective = ista_objective(echo, filters, plan, lambda_l1, &x)?;
        if new_objective > objective + 1e-10 * objective.abs().max(1.0) {
            return Err(Error::Divergence {
                previous: objective,
                current: new_objective,
                iteration,
            });
        }
        objective = new_objective;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::operators::make_csa_filters;
    use crate::sar::{default_fast_time_grid, SarParams, DEFAULT_REFERENCE_RANGE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_setup(m: usize, na: usize, nr: usize) -> (SarParams, NuftPlan, CsaFilters) {
        let p = SarParams::default().validated().unwrap();
        // Slightly nonuniform undersampled times.
        let times: Vec<f64> = (0..m)
            .map(|k| {
                let stride = na as f64 / (m as f64 * p.prf);
                k as f64 * stride + 0.13 * ((k * 3 % 7) as f64 / 7.0) / p.prf
            })
            .collect();
        let plan = NuftPlan::new(&times, na, p.prf).unwrap();
        let grid = default_fast_time_grid(&p, nr, DEFAULT_REFERENCE_RANGE);
        let filters = make_csa_filters(&p, &plan, &grid, DEFAULT_REFERENCE_RANGE).unwrap();
        (p, plan, filters)
    }

    fn sparse_echo(p: &SarParams, plan: &NuftPlan, filters: &CsaFilters, seed: u64) -> EchoMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let na = plan.doppler_bin_count();
        let nr = filters.range_samples();
        let mut scene = ReflectivityMap::new(
            Array2::zeros((na, nr)),
            p.azimuth_spacing(),
            p.range_spacing(),
        )
        .unwrap();
        for _ in 0..4 {
            let a = rng.gen_range(0..na);
            let r = rng.gen_range(0..nr);
            scene.data[[a, r]] = Complex64::new(rng.gen::<f64>() + 0.5, rng.gen::<f64>() - 0.5);
        }
        csa_inverse(filters, plan, &scene).unwrap()
    }

    #[test]
    fn residual_decreases_without_regularization() {
        let (p, plan, filters) = tiny_setup(6, 8, 8);
        let echo = sparse_echo(&p, &plan, &filters, 1);
        let step = ista_step_bound(&filters, &plan).unwrap();
        let x = ista_baseline(&echo, &filters, &plan, 0.0, step, 50).unwrap();
        let start = ista_objective(&echo, &filters, &plan, 0.0, &zero_like(&x)).unwrap();
        let end = ista_objective(&echo, &filters, &plan, 0.0, &x).unwrap();
        assert!(end < 0.5 * start, "objective {end} vs initial {start}");
    }

    fn zero_like(x: &ReflectivityMap) -> ReflectivityMap {
        ReflectivityMap::new(Array2::zeros(x.data.dim()), x.azimuth_spacing, x.range_spacing)
            .unwrap()
    }

    #[test]
    fn huge_threshold_yields_zero_image() {
        let (p, plan, filters) = tiny_setup(6, 8, 8);
        let echo = sparse_echo(&p, &plan, &filters, 2);
        let step = ista_step_bound(&filters, &plan).unwrap();
        let x = ista_baseline(&echo, &filters, &plan, 1e12, step, 10).unwrap();
        assert!(x.data.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let (p, plan, filters) = tiny_setup(6, 8, 8);
        let echo = sparse_echo(&p, &plan, &filters, 3);
        let bound = ista_step_bound(&filters, &plan).unwrap();
        assert!(matches!(
            ista_baseline(&echo, &filters, &plan, 0.1, bound * 3.0, 5),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn matches_dense_fista_oracle_on_tiny_instance() {
        let (p, plan, filters) = tiny_setup(6, 8, 8);
        let echo = sparse_echo(&p, &plan, &filters, 7);
        let na = 8;
        let nr = 8;
        let dim = na * nr;
        let rows = echo.data.len();
        // Materialize the forward model A = H* column by column.
        let mut a_mat = Array2::<Complex64>::zeros((rows, dim));
        for k in 0..dim {
            let mut data = Array2::<Complex64>::zeros((na, nr));
            data[[k / nr, k % nr]] = Complex64::new(1.0, 0.0);
            let map = ReflectivityMap::new(data, p.azimuth_spacing(), p.range_spacing()).unwrap();
            let out = csa_inverse(&filters, &plan, &map).unwrap();
            for i in 0..rows {
                a_mat[[i, k]] = out.data[[i / nr, i % nr]];
            }
        }
        let s_vec = Array1::from_shape_fn(echo.data.len(), |i| echo.data[[i / nr, i % nr]]);
        let lambda_l1 = 0.5;

        // Test-side FISTA oracle on the dense objective.
        let ah = a_mat.t().mapv(|z| z.conj());
        let gram = ah.dot(&a_mat);
        let lip = 2.0 * linalg::power_iteration(gram.nrows(), |v| gram.dot(v), 100, 1);
        let step = 1.0 / lip;
        let shrink = |z: Complex64, t: f64| {
            let m = z.norm();
            if m <= t {
                Complex64::new(0.0, 0.0)
            } else {
                z * ((m - t) / m)
            }
        };
        let objective = |x: &Array1<Complex64>| {
            let r = &a_mat.dot(x) - &s_vec;
            r.iter().map(|z| z.norm_sqr()).sum::<f64>()
                + lambda_l1 * x.iter().map(|z| z.norm()).sum::<f64>()
        };
        let mut x = Array1::<Complex64>::zeros(a_mat.ncols());
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..2000 {
            let grad = ah.dot(&(&a_mat.dot(&y) - &s_vec)).mapv(|z| z * 2.0);
            let x_next = Array1::from_shape_fn(x.len(), |i| {
                shrink(y[i] - grad[i] * step, step * lambda_l1)
            });
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = Array1::from_shape_fn(x.len(), |i| {
                x_next[i] + (x_next[i] - x[i]) * momentum
            });
            x = x_next;
            t = t_next;
        }
        let oracle_objective = objective(&x);

        let ista_step = ista_step_bound(&filters, &plan).unwrap();
        let recon = ista_baseline(&echo, &filters, &plan, lambda_l1, ista_step, 500).unwrap();
        let ista_obj = ista_objective(&echo, &filters, &plan, lambda_l1, &recon).unwrap();
        assert!(
            (ista_obj - oracle_objective).abs() <= 1e-4 * oracle_objective.abs().max(1.0),
            "ista {ista_obj} vs fista oracle {oracle_objective}"
        );
    }
}
