//! Conjugate gradients on Hermitian positive semi-definite operators.

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;

fn norm_sqr(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn re_inner(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Approximately solve `A x = rhs` for a Hermitian PSD operator given as a
/// closure, starting from zero. Stops at the iteration cap or when the
/// relative residual drops to `tol`; a non-positive curvature direction is
/// reported as a distinct breakdown error.
pub fn cg_solve<F>(
    mut apply: F,
    rhs: &Array2<Complex64>,
    max_iterations: usize,
    tol: f64,
) -> Result<Array2<Complex64>>
where
    F: FnMut(&Array2<Complex64>) -> Array2<Complex64>,
{
    if max_iterations == 0 {
        return Err(Error::InvalidParameter("cg_solve needs at least one iteration".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
    }
    let b_norm = norm_sqr(rhs).sqrt();
    let mut x = Array2::zeros(rhs.dim());
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rho = norm_sqr(&r);
    for iteration in 0..max_iterations {
        if rho.sqrt() <= tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let curvature = re_inner(&p, &ap);
        if curvature <= 0.0 {
            return Err(Error::CgBreakdown { curvature, iteration });
        }
        let alpha = rho / curvature;
        ndarray::Zip::from(&mut x).and(&p).for_each(|xi, pi| *xi += pi * alpha);
        ndarray::Zip::from(&mut r).and(&ap).for_each(|ri, api| *ri -= api * alpha);
        let rho_next = norm_sqr(&r);
        let beta = rho_next / rho;
        ndarray::Zip::from(&mut p).and(&r).for_each(|pi, ri| *pi = ri + *pi * beta);
        rho = rho_next;
    }
    Ok(x)
}
