//! Planned FFT helpers over `ndarray` rasters.
//!
//! Conventions used throughout the crate: the forward transform is
//! unnormalized, the inverse carries the 1/N factor. Rasters are stored
//! azimuth-major (rows = pulses / azimuth cells, columns = range cells), so
//! "range FFT" acts along rows and "azimuth FFT" acts along columns.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place unnormalized FFT along every row (no 1/N on the inverse).
pub fn fft_rows_raw(data: &mut Array2<Complex64>, inverse: bool) {
    let n = data.ncols();
    if n == 0 {
        return;
    }
    let fft = plan(n, inverse);
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major raster");
        fft.process(slice);
    }
}

/// In-place FFT along every row (the range axis).
pub fn fft_rows(data: &mut Array2<Complex64>, inverse: bool) {
    fft_rows_raw(data, inverse);
    if inverse {
        let scale = 1.0 / data.ncols() as f64;
        data.mapv_inplace(|v| v * scale);
    }
}

/// In-place unnormalized FFT along every column (no 1/N on the inverse).
pub fn fft_cols_raw(data: &mut Array2<Complex64>, inverse: bool) {
    let n = data.nrows();
    if n == 0 {
        return;
    }
    let fft = plan(n, inverse);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..data.ncols() {
        for r in 0..n {
            buf[r] = data[[r, c]];
        }
        fft.process(&mut buf);
        for r in 0..n {
            data[[r, c]] = buf[r];
        }
    }
}

/// In-place FFT along every column (the azimuth axis).
pub fn fft_cols(data: &mut Array2<Complex64>, inverse: bool) {
    fft_cols_raw(data, inverse);
    if inverse {
        let scale = 1.0 / data.nrows() as f64;
        data.mapv_inplace(|v| v * scale);
    }
}

/// Out-of-place 2-D FFT (rows then columns).
pub fn fft2(data: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
    let mut out = data.clone();
    fft_rows(&mut out, inverse);
    fft_cols(&mut out, inverse);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn forward_then_inverse_is_identity() {
        let mut data = Array2::from_shape_fn((8, 6), |(r, c)| {
            Complex64::new((r * 7 + c) as f64, (c * 3) as f64 - 1.0)
        });
        let original = data.clone();
        fft_rows(&mut data, false);
        fft_rows(&mut data, true);
        fft_cols(&mut data, false);
        fft_cols(&mut data, true);
        for (a, b) in data.iter().zip(original.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_on_columns() {
        let n = 5;
        let mut data = Array2::from_shape_fn((n, 1), |(r, _)| {
            Complex64::new(r as f64 + 0.5, -(r as f64))
        });
        let input: Vec<Complex64> = data.column(0).to_vec();
        fft_cols(&mut data, false);
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, v) in input.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, phase);
            }
            assert!((data[[k, 0]] - acc).norm() < 1e-12);
        }
    }
}
