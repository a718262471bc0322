//! Azimuth sampling patterns: generation, constraint projection, statistics.
//!
//! A pattern is a sorted list of continuous transmit times inside a half-open
//! aperture, with a minimum spacing between consecutive pulses. Patterns are
//! continuous-valued so they can be optimized by gradient descent and kept
//! feasible by projection rather than by rounding onto a grid.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};

/// Relative slack used when validating spacing constraints, so that patterns
/// produced by exact-arithmetic repairs are not rejected over rounding.
const SPACING_SLACK: f64 = 1e-9;

/// Half-open observation interval `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    pub start: f64,
    pub end: f64,
}

impl Aperture {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidParameter(format!(
                "aperture must satisfy start < end, got [{start}, {end})"
            )));
        }
        Ok(Aperture { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Sorted continuous azimuth sample times with their feasibility constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    positions: Vec<f64>,
    aperture: Aperture,
    min_spacing: f64,
}

impl SamplingPattern {
    /// Build a pattern, validating every invariant: positions strictly
    /// increasing, inside the aperture, gaps at least `min_spacing` (up to a
    /// tiny rounding slack), and at least one position.
    pub fn new(positions: Vec<f64>, aperture: Aperture, min_spacing: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("pattern must contain at least one position".into()));
        }
        if !(min_spacing >= 0.0 && min_spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "min_spacing must be >= 0, got {min_spacing}"
            )));
        }
        let slack = SPACING_SLACK * aperture.length().max(min_spacing);
        for (i, &t) in positions.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("pattern position {i}")));
            }
            if !aperture.contains(t) {
                return Err(Error::InvalidParameter(format!(
                    "position {t} outside aperture [{}, {})",
                    aperture.start, aperture.end
                )));
            }
        }
        for w in positions.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "positions must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
            if w[1] - w[0] < min_spacing - slack {
                return Err(Error::InvalidParameter(format!(
                    "gap {} below min_spacing {}",
                    w[1] - w[0],
                    min_spacing
                )));
            }
        }
        Ok(SamplingPattern { positions, aperture, min_spacing })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn aperture(&self) -> Aperture {
        self.aperture
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    /// Number of pulses (the budget).
    pub fn budget(&self) -> usize {
        self.positions.len()
    }

    /// Consecutive gaps, length budget - 1.
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Serialize as CSV: one position per line, seconds, 15 significant digits.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        for &t in &self.positions {
            writeln!(writer, "{t:.14e}")?;
        }
        Ok(())
    }

    /// Parse a CSV produced by [`write_csv`]; constraints must be re-supplied.
    pub fn read_csv<R: BufRead>(reader: R, aperture: Aperture, min_spacing: f64) -> Result<Self> {
        let mut positions = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: f64 = trimmed.parse().map_err(|e| {
                Error::InvalidParameter(format!("pattern CSV line {}: {e}", lineno + 1))
            })?;
            positions.push(value);
        }
        SamplingPattern::new(positions, aperture, min_spacing)
    }
}

/// Equispaced pattern at stride `length/budget` starting at the aperture start.
pub fn uniform_pattern(aperture: Aperture, budget: usize) -> Result<SamplingPattern> {
    if budget < 2 {
        return Err(Error::InvalidParameter(format!("budget must be >= 2, got {budget}")));
    }
    let stride = aperture.length() / budget as f64;
    let positions = (0..budget).map(|k| aperture.start + k as f64 * stride).collect();
    SamplingPattern::new(positions, aperture, 0.0)
}

/// Uniform pattern with seeded jitter of up to `jitter_frac` of the stride on
/// every position, projected back onto the constraint set. This is the
/// initializer for the trainable pattern.
pub fn jittered_uniform_pattern(
    aperture: Aperture,
    budget: usize,
    min_spacing: f64,
    jitter_frac: f64,
    seed: u64,
) -> Result<SamplingPattern> {
    let base = uniform_pattern(aperture, budget)?;
    let stride = aperture.length() / budget as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jittered: Vec<f64> = base
        .positions()
        .iter()
        .map(|&t| t + (rng.gen::<f64>() * 2.0 - 1.0) * jitter_frac * stride)
        .collect();
    project_constraints(&jittered, aperture, min_spacing)
}

/// Dart-throwing Poisson-disk pattern: uniform draws rejected when closer
/// than `min_spacing` to an accepted sample, until the budget is reached.
pub fn poisson_disk_pattern(
    aperture: Aperture,
    budget: usize,
    min_spacing: f64,
    seed: u64,
) -> Result<SamplingPattern> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be >= 1".into()));
    }
    if !(min_spacing >= 0.0) {
        return Err(Error::InvalidParameter(format!("min_spacing must be >= 0, got {min_spacing}")));
    }
    if budget as f64 * min_spacing >= aperture.length() {
        return Err(Error::InfeasiblePattern(format!(
            "budget {} x min_spacing {} does not fit aperture length {}",
            budget,
            min_spacing,
            aperture.length()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted: Vec<f64> = Vec::with_capacity(budget);
    let max_attempts = budget.max(1) * 10_000;
    let mut attempts = 0usize;
    while accepted.len() < budget {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InfeasiblePattern(format!(
                "dart throwing failed after {max_attempts} attempts"
            )));
        }
        let candidate = aperture.start + rng.gen::<f64>() * aperture.length();
        // Insertion point in the sorted accepted list.
        let idx = accepted.partition_point(|&t| t < candidate);
        let ok_left = idx == 0 || candidate - accepted[idx - 1] > min_spacing.max(0.0)
            && candidate != accepted[idx - 1];
        let ok_right = idx == accepted.len() || accepted[idx] - candidate > min_spacing.max(0.0);
        let distinct = (idx == 0 || accepted[idx - 1] < candidate)
            && (idx == accepted.len() || accepted[idx] > candidate);
        if ok_left && ok_right && distinct {
            accepted.insert(idx, candidate);
        }
    }
    SamplingPattern::new(accepted, aperture, min_spacing)
}

/// Staggered pattern: the pulse intervals sweep linearly from `pri_min` to
/// `pri_max` across the budget, positions are the cumulative sums from the
/// aperture start.
pub fn staggered_pattern(
    aperture: Aperture,
    budget: usize,
    pri_min: f64,
    pri_max: f64,
) -> Result<SamplingPattern> {
    if budget < 2 {
        return Err(Error::InvalidParameter(format!("budget must be >= 2, got {budget}")));
    }
    if !(pri_min > 0.0 && pri_max >= pri_min) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < pri_min <= pri_max, got ({pri_min}, {pri_max})"
        )));
    }
    let gaps = budget - 1;
    let mean = 0.5 * (pri_min + pri_max);
    if gaps as f64 * mean >= aperture.length() {
        return Err(Error::InfeasiblePattern(format!(
            "{gaps} intervals of mean {mean} exceed aperture length {}",
            aperture.length()
        )));
    }
    let mut positions = Vec::with_capacity(budget);
    let mut t = aperture.start;
    positions.push(t);
    for k in 0..gaps {
        let frac = if gaps > 1 { k as f64 / (gaps - 1) as f64 } else { 0.5 };
        t += pri_min + (pri_max - pri_min) * frac;
        positions.push(t.min(next_below(aperture.end)));
    }
    SamplingPattern::new(positions, aperture, 0.0)
}

/// Largest representable f64 strictly below `x`.
fn next_below(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Project raw positions onto the constraint set: sort, enforce minimum gaps
/// by pool-adjacent-violators isotonic repair, then clamp the chain into the
/// aperture with a forward/backward pass. The result is the Euclidean
/// projection for the interior and is idempotent.
pub fn project_constraints(
    raw_positions: &[f64],
    aperture: Aperture,
    min_spacing: f64,
) -> Result<SamplingPattern> {
    let m = raw_positions.len();
    if m == 0 {
        return Err(Error::InvalidParameter("cannot project an empty pattern".into()));
    }
    if raw_positions.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("raw pattern position".into()));
    }
    let len = aperture.length();
    if (m as f64 - 1.0) * min_spacing >= len {
        return Err(Error::InfeasiblePattern(format!(
            "{} positions with min_spacing {} cannot fit aperture length {}",
            m, min_spacing, len
        )));
    }
    let mut sorted = raw_positions.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite positions"));

    // Shifted variables u_k = x_k - k*s turn the spacing constraint into
    // monotonicity; PAV gives the L2-optimal isotonic repair.
    let shifted: Vec<f64> = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| x - k as f64 * min_spacing)
        .collect();
    let repaired = pool_adjacent_violators(&shifted);
    let mut positions: Vec<f64> = repaired
        .iter()
        .enumerate()
        .map(|(k, &u)| u + k as f64 * min_spacing)
        .collect();

    // Clamp into the aperture while preserving gaps.
    let upper = next_below(aperture.end);
    for k in 0..m {
        let lower_bound = aperture.start + k as f64 * min_spacing;
        if positions[k] < lower_bound {
            positions[k] = lower_bound;
        }
    }
    for k in (0..m).rev() {
        let upper_bound = upper - (m - 1 - k) as f64 * min_spacing;
        if positions[k] > upper_bound {
            positions[k] = upper_bound;
        }
    }
    SamplingPattern::new(positions, aperture, min_spacing)
}

/// L2 isotonic regression by pool-adjacent-violators.
fn pool_adjacent_violators(values: &[f64]) -> Vec<f64> {
    // Blocks of (mean, count) merged whenever a new value breaks monotonicity.
    let mut means: Vec<f64> = Vec::with_capacity(values.len());
    let mut counts: Vec<usize> = Vec::with_capacity(values.len());
    for &v in values {
        means.push(v);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, c2) = (means.pop().unwrap(), counts.pop().unwrap());
            let last = means.len() - 1;
            let c1 = counts[last];
            means[last] = (means[last] * c1 as f64 + m2 * c2 as f64) / (c1 + c2) as f64;
            counts[last] = c1 + c2;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (m, c) in means.iter().zip(counts.iter()) {
        out.extend(std::iter::repeat(*m).take(*c));
    }
    out
}

/// Histogram of consecutive gaps: equal-width bins spanning the observed gap
/// range, counts summing to budget - 1.
pub fn interval_histogram(pattern: &SamplingPattern, bins: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if pattern.budget() < 2 {
        return Err(Error::InvalidParameter(
            "interval histogram needs at least two samples".into(),
        ));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be >= 1".into()));
    }
    let gaps = pattern.gaps();
    let mut lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < f64::EPSILON * hi.abs().max(1e-300) {
        // Degenerate spread (e.g. uniform pattern): widen symmetrically so
        // every gap lands in an interior bin.
        let pad = hi.abs().max(1e-12) * 1e-9;
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + b as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for g in gaps {
        let mut idx = ((g - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    Ok((edges, counts))
}
