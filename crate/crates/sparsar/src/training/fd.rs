//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

/// Compare analytic gradients against central finite differences of `loss`
/// over the selected scalar parameters; returns the worst relative error.
///
/// The relative error of parameter `i` is `|analytic - fd|` divided by
/// `max(|analytic|, |fd|, floor)` where the floor is a small fraction of the
/// largest gradient magnitude, so parameters with a negligible true gradient
/// cannot dominate the score with finite-difference noise.
pub fn finite_difference_check<F>(
    initial: &[f64],
    analytic: &[f64],
    step: f64,
    mut loss: F,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if initial.len() != analytic.len() {
        return Err(Error::DimensionMismatch(format!(
            "finite_difference_check: {} parameters vs {} gradients",
            initial.len(),
            analytic.len()
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    let mut numeric = vec![0.0; initial.len()];
    for i in 0..initial.len() {
        if initial[i] + step == initial[i] || initial[i] - step == initial[i] {
            return Err(Error::StepUnderflow { step, index: i });
        }
        let mut plus = initial.to_vec();
        let mut minus = initial.to_vec();
        plus[i] += step;
        minus[i] -= step;
        numeric[i] = (loss(&plus) - loss(&minus)) / (2.0 * step);
    }
    let scale = analytic
        .iter()
        .chain(numeric.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = 1e-7 * (1.0 + scale);
    let mut worst = 0.0f64;
    for i in 0..initial.len() {
        let denom = analytic[i].abs().max(numeric[i].abs()).max(floor);
        worst = worst.max((analytic[i] - numeric[i]).abs() / denom);
    }
    Ok(worst)
}
