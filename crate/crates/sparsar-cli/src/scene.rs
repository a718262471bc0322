//! Synthetic test scenes: ship-like rectangular blobs plus isolated point
//! scatterers, at three sparsity tiers, with random phases per cell.
//!
//! These stand in for sea-surface ship patches when no imagery is supplied;
//! the tiers differ only in scatterer density.

use crate::config::SceneTier;
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsar::sar::{ReflectivityMap, SarParams};

/// Blob/point counts for a tier, scaled to the raster area.
fn tier_counts(tier: SceneTier, size: usize) -> (usize, usize) {
    let scale = (size * size) as f64 / 1024.0;
    let (blobs, points) = match tier {
        SceneTier::Sparse => (1.0, 4.0),
        SceneTier::Medium => (2.0, 10.0),
        SceneTier::Dense => (5.0, 24.0),
    };
    (
        ((blobs * scale).round() as usize).max(1),
        ((points * scale).round() as usize).max(2),
    )
}

/// Deterministic synthetic scene on the default raster of `params`.
pub fn synthetic_scene(
    params: &SarParams,
    size: usize,
    tier: SceneTier,
    seed: u64,
) -> ReflectivityMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::<Complex64>::zeros((size, size));
    let margin = 2usize;
    let span = size - 2 * margin;
    let (blobs, points) = tier_counts(tier, size);
    let place = |data: &mut Array2<Complex64>, a: usize, r: usize, amp: f64, rng: &mut ChaCha8Rng| {
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        data[[a, r]] = Complex64::from_polar(amp, phase);
    };
    for _ in 0..blobs {
        let h = rng.gen_range(1..=3usize);
        let w = rng.gen_range(2..=5usize);
        let a0 = margin + rng.gen_range(0..span.saturating_sub(h).max(1));
        let r0 = margin + rng.gen_range(0..span.saturating_sub(w).max(1));
        for da in 0..h {
            for dr in 0..w {
                let amp = 0.5 + rng.gen::<f64>();
                place(&mut data, a0 + da, r0 + dr, amp, &mut rng);
            }
        }
    }
    for _ in 0..points {
        let a = margin + rng.gen_range(0..span);
        let r = margin + rng.gen_range(0..span);
        let amp = 0.5 + 1.5 * rng.gen::<f64>();
        place(&mut data, a, r, amp, &mut rng);
    }
    ReflectivityMap::new(data, params.azimuth_spacing(), params.range_spacing())
        .expect("non-empty raster")
}

/// Complex scene from a real amplitude image: independent uniform random
/// phase per pixel, amplitudes normalized so the peak is 1.
pub fn scene_from_amplitude(
    params: &SarParams,
    amplitude: &Array2<f64>,
    seed: u64,
) -> ReflectivityMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let peak = amplitude.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let data = amplitude.mapv(|v| v / peak);
    let complex = Array2::from_shape_fn(data.dim(), |idx| {
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(data[idx], phase)
    });
    ReflectivityMap::new(complex, params.azimuth_spacing(), params.range_spacing())
        .expect("non-empty raster")
}

/// Decorrelated per-purpose seeds from a master seed (splitmix64 mixing).
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(domain.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(index.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
