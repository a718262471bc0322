//! Small dense complex linear-algebra helpers.
//!
//! These back the tiny-instance oracles and diagnostics: materializing a
//! linear operator as an explicit matrix, LU solves, and a power-iteration
//! bound for step-size selection. Nothing here is tuned for scale; all sizes
//! are expected to stay in the few-thousand-unknown regime.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Materialize `apply` as an explicit matrix by probing with basis vectors.
///
/// `apply` must be linear and map length-`dim` vectors to length-`dim`
/// vectors; column `k` of the result is `apply(e_k)`.
pub fn materialize<F>(dim: usize, mut apply: F) -> Array2<Complex64>
where
    F: FnMut(&Array1<Complex64>) -> Array1<Complex64>,
{
    let mut mat = Array2::zeros((dim, dim));
    let mut basis = Array1::zeros(dim);
    for k in 0..dim {
        basis[k] = Complex64::new(1.0, 0.0);
        let col = apply(&basis);
        for r in 0..dim {
            mat[[r, k]] = col[r];
        }
        basis[k] = Complex64::new(0.0, 0.0);
    }
    mat
}

/// Solve `A x = b` by LU decomposition with partial pivoting.
pub fn lu_solve(a: &Array2<Complex64>, b: &Array1<Complex64>) -> Result<Array1<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve: matrix {}x{}, rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let mut pivot = col;
        let mut best = lu[[col, col]].norm();
        for r in col + 1..n {
            let mag = lu[[r, col]].norm();
            if mag > best {
                best = mag;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::InvalidParameter("lu_solve: singular matrix".into()));
        }
        if pivot != col {
            for c in 0..n {
                let tmp = lu[[col, c]];
                lu[[col, c]] = lu[[pivot, c]];
                lu[[pivot, c]] = tmp;
            }
            let tmp = x[col];
            x[col] = x[pivot];
            x[pivot] = tmp;
        }
        let diag = lu[[col, col]];
        for r in col + 1..n {
            let factor = lu[[r, col]] / diag;
            lu[[r, col]] = factor;
            for c in col + 1..n {
                let sub = factor * lu[[col, c]];
                lu[[r, c]] -= sub;
            }
            let sub = factor * x[col];
            x[r] -= sub;
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in r + 1..n {
            acc -= lu[[r, c]] * x[c];
        }
        x[r] = acc / lu[[r, r]];
    }
    Ok(x)
}

/// Largest-eigenvalue estimate of a Hermitian PSD operator by power iteration.
///
/// The probe vector is derived deterministically from `seed`.
pub fn power_iteration<F>(dim: usize, mut apply: F, iterations: usize, seed: u64) -> f64
where
    F: FnMut(&Array1<Complex64>) -> Array1<Complex64>,
{
    // Cheap deterministic probe; quality only needs a nonzero projection
    // onto the leading eigenvector.
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v: Array1<Complex64> = Array1::from_shape_fn(dim, |_| Complex64::new(next(), next()));
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.mapv_inplace(|z| z / norm);
        let w = apply(&v);
        lambda = v
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        v = w;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_known_system() {
        let a = Array2::from_shape_vec(
            (2, 2),
            vec![
                Complex64::new(2.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(1.0, -1.0),
                Complex64::new(3.0, 0.0),
            ],
        )
        .unwrap();
        let x_true = Array1::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)]);
        let b = a.dot(&x_true);
        let x = lu_solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).norm() < 1e-12);
        }
    }

    #[test]
    fn materialize_recovers_matrix() {
        let a = Array2::from_shape_fn((3, 3), |(r, c)| Complex64::new(r as f64, c as f64 + 1.0));
        let m = materialize(3, |v| a.dot(v));
        for (x, y) in m.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn power_iteration_finds_dominant_eigenvalue() {
        // Hermitian diagonal matrix: eigenvalues 1, 4, 9.
        let diag = [1.0, 4.0, 9.0];
        let lambda = power_iteration(
            3,
            |v| Array1::from_shape_fn(3, |i| v[i] * diag[i]),
            100,
            7,
        );
        assert!((lambda - 9.0).abs() < 1e-9);
    }
}
