//! One-dimensional p-Wasserstein distances via quantile coupling.
//!
//! In one dimension the optimal transport plan pairs equal quantiles, so
//! W_p between an empirical law and a target is computable exactly from the
//! sorted samples: W_p^p = (1/N)·Σᵢ |s₍ᵢ₎ − Q((i+½)/N)|^p with Q the target
//! quantile function.  The midpoint grid (i+½)/N is the pinned convention —
//! it is symmetric, never evaluates Q at 0 or 1, and makes the distance a
//! deterministic function of the inputs.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use statrs::distribution::ContinuousCDF;

fn validate_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Validation("empty sample set".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("samples must be finite".into()));
    }
    Ok(())
}

fn validate_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::Validation(format!("Wasserstein order p must be ≥ 1, got {p}")));
    }
    Ok(())
}

/// Gaussian quantiles on the midpoint grid, ascending.
pub(crate) fn gaussian_quantile_grid(count: usize, mean: f64, variance: f64) -> Result<Vec<f64>> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::Validation(format!("variance must be ≥ 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(vec![mean; count]);
    }
    let normal = statrs::distribution::Normal::new(mean, variance.sqrt())
        .map_err(|e| Error::Validation(format!("bad Gaussian target: {e}")))?;
    Ok((0..count)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / count as f64))
        .collect())
}

/// W_p between sorted samples and a precomputed ascending quantile grid of
/// the same length.
pub(crate) fn wp_sorted_vs_grid(sorted: &[f64], grid: &[f64], p: f64) -> f64 {
    debug_assert_eq!(sorted.len(), grid.len());
    let sum: f64 = sorted
        .iter()
        .zip(grid)
        .map(|(&s, &q)| (s - q).abs().powf(p))
        .sum();
    (sum / sorted.len() as f64).powf(1.0 / p)
}

/// Exact empirical-vs-Gaussian p-Wasserstein distance by quantile coupling.
pub fn wasserstein_1d(samples: &[f64], mean: f64, variance: f64, p: f64) -> Result<f64> {
    validate_samples(samples)?;
    validate_p(p)?;
    let grid = gaussian_quantile_grid(samples.len(), mean, variance)?;
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(wp_sorted_vs_grid(&sorted, &grid, p))
}

/// p-Wasserstein distance between two equal-size empirical laws (the exact
/// 1-D optimal coupling pairs the order statistics).
pub fn wasserstein_1d_empirical(a: &[f64], b: &[f64], p: f64) -> Result<f64> {
    validate_samples(a)?;
    validate_samples(b)?;
    validate_p(p)?;
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "empirical Wasserstein needs equal sample counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let sum: f64 = sa.iter().zip(&sb).map(|(&x, &y)| (x - y).abs().powf(p)).sum();
    Ok((sum / sa.len() as f64).powf(1.0 / p))
}

/// Percentile bootstrap for a scalar statistic of an i.i.d. sample.
/// Returns (lo, hi, se) at the 95% level.  Deterministic in `seed`.
pub fn bootstrap_ci(
    samples: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    validate_samples(samples)?;
    if resamples < 2 {
        return Err(Error::Validation("need at least 2 bootstrap resamples".into()));
    }
    let n = samples.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = vec![0.0f64; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        stats.push(statistic(&scratch));
    }
    stats.sort_unstable_by(f64::total_cmp);
    let b = stats.len();
    let pick = |q: f64| stats[((q * (b - 1) as f64).round() as usize).min(b - 1)];
    let mean = stats.iter().sum::<f64>() / b as f64;
    let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (b - 1) as f64;
    Ok((pick(0.025), pick(0.975), var.sqrt()))
}
