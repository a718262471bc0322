//! Image-quality metrics: SSIM and PSNR.
//!
//! Complex imagery is evaluated on magnitude, scaled to [0, 255] by the
//! reference image's peak (see [`magnitude_pair`]), which matches how the
//! experiment reports score reconstructions against their ground truth.

use crate::error::{Error, Result};
use crate::sar::ReflectivityMap;
use ndarray::Array2;

/// Default SSIM luminance constant.
pub const SSIM_K1: f64 = 0.01;
/// Default SSIM contrast constant.
pub const SSIM_K2: f64 = 0.03;
/// Default SSIM sliding-window side (uniform window).
pub const SSIM_WINDOW: usize = 8;
/// Dynamic range of 8-bit imagery.
pub const DYNAMIC_RANGE: f64 = 255.0;
/// Flag value written to reports when the PSNR is infinite (zero MSE).
pub const PSNR_CAP_DB: f64 = 999.0;

/// Mean structural similarity over all fully-interior sliding windows of
/// side `window`, with uniform weighting and population statistics.
pub fn ssim(
    test: &Array2<f64>,
    reference: &Array2<f64>,
    window: usize,
    k1: f64,
    k2: f64,
    dynamic_range: f64,
) -> Result<f64> {
    if test.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(format!(
            "ssim: {:?} vs {:?}",
            test.dim(),
            reference.dim()
        )));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::InvalidParameter(format!("dynamic range must be > 0, got {dynamic_range}")));
    }
    if window == 0 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    let (h, w) = test.dim();
    if h < window || w < window {
        return Err(Error::DimensionMismatch(format!(
            "image {h}x{w} smaller than window {window}"
        )));
    }
    let c1 = (k1 * dynamic_range).powi(2);
    let c2 = (k2 * dynamic_range).powi(2);
    let n = (window * window) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=(h - window) {
        for left in 0..=(w - window) {
            let mut mean_a = 0.0;
            let mut mean_b = 0.0;
            for i in 0..window {
                for j in 0..window {
                    mean_a += test[[top + i, left + j]];
                    mean_b += reference[[top + i, left + j]];
                }
            }
            mean_a /= n;
            mean_b /= n;
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for i in 0..window {
                for j in 0..window {
                    let da = test[[top + i, left + j]] - mean_a;
                    let db = reference[[top + i, left + j]] - mean_b;
                    var_a += da * da;
                    var_b += db * db;
                    cov += da * db;
                }
            }
            var_a /= n;
            var_b /= n;
            cov /= n;
            let luminance = (2.0 * mean_a * mean_b + c1) / (mean_a * mean_a + mean_b * mean_b + c1);
            let structure = (2.0 * cov + c2) / (var_a + var_b + c2);
            total += luminance * structure;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM with the crate defaults (8x8 uniform window, K1 = 0.01, K2 = 0.03,
/// L = 255).
pub fn ssim_default(test: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    ssim(test, reference, SSIM_WINDOW, SSIM_K1, SSIM_K2, DYNAMIC_RANGE)
}

/// Peak signal-to-noise ratio `10 log10(peak^2 / MSE)` in dB; returns
/// `f64::INFINITY` for a zero MSE (callers writing reports cap it at
/// [`PSNR_CAP_DB`]).
pub fn psnr(test: &Array2<f64>, reference: &Array2<f64>, peak: f64) -> Result<f64> {
    if test.dim() != reference.dim() {
        return Err(Error::DimensionMismatch(format!(
            "psnr: {:?} vs {:?}",
            test.dim(),
            reference.dim()
        )));
    }
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let n = test.len() as f64;
    let mse: f64 = test
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Magnitude images of a test/reference pair, both scaled to [0, 255] by the
/// reference peak. A zero reference maps both to zero.
pub fn magnitude_pair(
    test: &ReflectivityMap,
    reference: &ReflectivityMap,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if test.data.dim() != reference.data.dim() {
        return Err(Error::DimensionMismatch(format!(
            "magnitude pair: {:?} vs {:?}",
            test.data.dim(),
            reference.data.dim()
        )));
    }
    let ref_mag = reference.data.mapv(|z| z.norm());
    let peak = ref_mag.iter().cloned().fold(0.0f64, f64::max);
    let scale = if peak > 0.0 { DYNAMIC_RANGE / peak } else { 0.0 };
    let test_mag = test.data.mapv(|z| z.norm() * scale);
    Ok((test_mag, ref_mag.mapv(|v| v * scale)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((h, w), |_| rng.gen::<f64>() * 255.0)
    }

    #[test]
    fn ssim_identical_is_exactly_one() {
        let img = random_image(1, 16, 16);
        assert_eq!(ssim_default(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn ssim_negated_about_mean_is_below_one() {
        let img = random_image(2, 16, 16);
        let mean = img.iter().sum::<f64>() / img.len() as f64;
        let negated = img.mapv(|v| 2.0 * mean - v);
        let s = ssim_default(&negated, &img).unwrap();
        assert!(s < 1.0, "got {s}");
    }

    #[test]
    fn ssim_constant_images_match_closed_form() {
        let a = 120.0;
        let b = 80.0;
        let ia = Array2::from_elem((12, 12), a);
        let ib = Array2::from_elem((12, 12), b);
        let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
        let expected = (2.0 * a * b + c1) / (a * a + b * b + c1);
        let s = ssim_default(&ia, &ib).unwrap();
        assert!((s - expected).abs() < 1e-12, "got {s}, expected {expected}");
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        for seed in 0..10 {
            let a = random_image(seed, 14, 18);
            let b = random_image(seed + 100, 14, 18);
            let s1 = ssim_default(&a, &b).unwrap();
            let s2 = ssim_default(&b, &a).unwrap();
            assert!((s1 - s2).abs() < 1e-14);
            assert!((-1.0..=1.0).contains(&s1));
        }
    }

    #[test]
    fn ssim_rejects_small_images_and_shape_mismatch() {
        let a = random_image(0, 4, 4);
        assert!(ssim_default(&a, &a).is_err());
        let b = random_image(0, 16, 16);
        let c = random_image(0, 16, 18);
        assert!(ssim_default(&b, &c).is_err());
    }

    #[test]
    fn psnr_uniform_unit_error_at_peak_255() {
        let a = Array2::from_elem((8, 8), 10.0);
        let b = Array2::from_elem((8, 8), 11.0);
        let v = psnr(&a, &b, 255.0).unwrap();
        let expected = 10.0 * (255.0f64 * 255.0).log10();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn psnr_drops_six_db_when_mse_quadruples() {
        let reference = random_image(3, 10, 10);
        let noisy1 = reference.mapv(|v| v + 1.0);
        let noisy2 = reference.mapv(|v| v + 2.0);
        let p1 = psnr(&noisy1, &reference, 255.0).unwrap();
        let p2 = psnr(&noisy2, &reference, 255.0).unwrap();
        assert!(((p1 - p2) - 6.0206).abs() < 0.01, "drop {}", p1 - p2);
    }

    #[test]
    fn psnr_identical_hits_the_sentinel() {
        let a = random_image(4, 8, 8);
        assert!(psnr(&a, &a, 255.0).unwrap().is_infinite());
    }

    #[test]
    fn psnr_strictly_decreases_in_mse() {
        let reference = Array2::from_elem((8, 8), 100.0);
        let mut last = f64::INFINITY;
        for step in 1..6 {
            let test = reference.mapv(|v| v + step as f64);
            let p = psnr(&test, &reference, 255.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }
}
