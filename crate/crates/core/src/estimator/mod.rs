//! Statistical verification of the diffusive limit.
//!
//! Everything here consumes immutable `EnsembleResult`s and is a pure,
//! deterministic function of its inputs (bootstrap randomness included —
//! all resampling flows from explicit seeds).  The three questions answered:
//!
//! 1. what effective covariance do the rescaled paths exhibit
//!    ([`msd_diffusivity`]),
//! 2. how far is a projected endpoint law from its Gaussian limit
//!    ([`projection_distance`], exact 1-D Wasserstein),
//! 3. how fast does that distance shrink in ε ([`rate_fit`]).
//!
//! The martingale-decomposition and ergodicity diagnostics live in their own
//! submodules.

pub mod ergodic;
pub mod martingale;
pub mod wasserstein;

pub use ergodic::{ergodicity_decay, DecayCurve};
pub use martingale::{martingale_decomposition_check, MartingaleReport};
pub use wasserstein::{bootstrap_ci, wasserstein_1d, wasserstein_1d_empirical};

use crate::error::{Error, Result};
use crate::integrator::EnsembleResult;
use rand::{Rng, SeedableRng};

/// A bounded linear functional ℓ on path space used to project the rescaled
/// law down to one dimension.  The representing measure must have total
/// variation at most 1 (the limit theorem is stated over the unit ball).
#[derive(Debug, Clone)]
pub enum ProjectionFunctional {
    /// ℓ = k·δ_T: project the endpoint onto `k`, ‖k‖₂ ≤ 1.
    Endpoint { k: Vec<f64> },
    /// ℓ = k·w(t)dt on the record grid (trapezoid discretization);
    /// ‖k‖₂·∫|w| ≤ 1.
    TimeAverage { k: Vec<f64>, weights: Vec<f64> },
}

/// Trapezoid weights of a (possibly nonuniform) increasing grid.
fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let r = times.len();
    let mut dt = vec![0.0f64; r];
    if r < 2 {
        return dt;
    }
    dt[0] = 0.5 * (times[1] - times[0]);
    dt[r - 1] = 0.5 * (times[r - 1] - times[r - 2]);
    for i in 1..r - 1 {
        dt[i] = 0.5 * (times[i + 1] - times[i - 1]);
    }
    dt
}

impl ProjectionFunctional {
    fn k(&self) -> &[f64] {
        match self {
            ProjectionFunctional::Endpoint { k } => k,
            ProjectionFunctional::TimeAverage { k, .. } => k,
        }
    }

    /// Check the unit-ball constraint against a concrete record grid.
    pub fn validate(&self, times: &[f64]) -> Result<()> {
        let k = self.k();
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("projection vector must be finite".into()));
        }
        let knorm = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tv = match self {
            ProjectionFunctional::Endpoint { .. } => knorm,
            ProjectionFunctional::TimeAverage { weights, .. } => {
                if weights.len() != times.len() {
                    return Err(Error::Validation(format!(
                        "weight grid has {} entries, record grid has {}",
                        weights.len(),
                        times.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::Validation("weights must be finite".into()));
                }
                let dt = trapezoid_weights(times);
                knorm * weights.iter().zip(&dt).map(|(w, d)| w.abs() * d).sum::<f64>()
            }
        };
        if tv > 1.0 + 1e-12 {
            return Err(Error::Validation(format!(
                "functional has total-variation norm {tv} > 1"
            )));
        }
        Ok(())
    }

    /// Apply ℓ to every path, producing one scalar sample per path.
    fn project(&self, ensemble: &EnsembleResult) -> Vec<f64> {
        match self {
            ProjectionFunctional::Endpoint { k } => (0..ensemble.path_count)
                .map(|p| {
                    let d = ensemble.endpoint_of(p);
                    k.iter().zip(d).map(|(a, b)| a * b).sum()
                })
                .collect(),
            ProjectionFunctional::TimeAverage { k, weights } => {
                let dt = trapezoid_weights(&ensemble.times);
                (0..ensemble.path_count)
                    .map(|p| {
                        let mut acc = 0.0;
                        for r in 0..ensemble.records {
                            let d = ensemble.displacement_at(p, r);
                            let kd: f64 = k.iter().zip(d).map(|(a, b)| a * b).sum();
                            acc += weights[r] * dt[r] * kd;
                        }
                        acc
                    })
                    .collect()
            }
        }
    }

    /// Variance of ℓ applied to the limiting Brownian motion with
    /// covariance `k2` (row-major n×n).
    fn limit_variance(&self, times: &[f64], k2: &[f64]) -> f64 {
        let k = self.k();
        let n = k.len();
        let kk2k: f64 = (0..n)
            .map(|a| (0..n).map(|b| k[a] * k2[a * n + b] * k[b]).sum::<f64>())
            .sum();
        match self {
            // Var ⟨k, B(T)⟩ = T·⟨k, K²k⟩
            ProjectionFunctional::Endpoint { .. } => times.last().copied().unwrap_or(0.0) * kk2k,
            // Var ∫w⟨k,B⟩dt = ⟨k,K²k⟩·∬ w(s)w(t)·min(s,t) ds dt
            ProjectionFunctional::TimeAverage { weights, .. } => {
                let dt = trapezoid_weights(times);
                let mut acc = 0.0;
                for (r, &tr) in times.iter().enumerate() {
                    for (s, &ts) in times.iter().enumerate() {
                        acc += weights[r] * dt[r] * weights[s] * dt[s] * tr.min(ts);
                    }
                }
                kk2k * acc
            }
        }
    }
}

/// Exact 1-D p-Wasserstein distance between the projected ensemble and its
/// Gaussian limit under effective covariance `k2` (row-major n×n).
pub fn projection_distance(
    ensemble: &EnsembleResult,
    functional: &ProjectionFunctional,
    k2: &[f64],
    p: f64,
) -> Result<f64> {
    let n = ensemble.n;
    if functional.k().len() != n || k2.len() != n * n {
        return Err(Error::Validation(format!(
            "projection dimensions disagree: k has {}, K² has {} entries, n = {n}",
            functional.k().len(),
            k2.len()
        )));
    }
    functional.validate(&ensemble.times)?;
    let samples = functional.project(ensemble);
    let var = functional.limit_variance(&ensemble.times, k2);
    wasserstein_1d(&samples, 0.0, var, p)
}

/// [`projection_distance`] plus a percentile-bootstrap confidence interval
/// over paths: returns (distance, ci_lo, ci_hi, se).  The Gaussian quantile
/// grid is computed once and shared by all resamples.
pub fn projection_distance_with_ci(
    ensemble: &EnsembleResult,
    functional: &ProjectionFunctional,
    k2: &[f64],
    p: f64,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64, f64, f64)> {
    let n = ensemble.n;
    if functional.k().len() != n || k2.len() != n * n {
        return Err(Error::Validation(format!(
            "projection dimensions disagree: k has {}, K² has {} entries, n = {n}",
            functional.k().len(),
            k2.len()
        )));
    }
    if resamples < 2 {
        return Err(Error::Validation("need at least 2 bootstrap resamples".into()));
    }
    functional.validate(&ensemble.times)?;
    let samples = functional.project(ensemble);
    let var = functional.limit_variance(&ensemble.times, k2);
    let grid = wasserstein::gaussian_quantile_grid(samples.len(), 0.0, var)?;

    let mut sorted = samples.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let distance = wasserstein::wp_sorted_vs_grid(&sorted, &grid, p);

    let m = samples.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = vec![0.0f64; m];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            *slot = samples[rng.gen_range(0..m)];
        }
        scratch.sort_unstable_by(f64::total_cmp);
        stats.push(wasserstein::wp_sorted_vs_grid(&scratch, &grid, p));
    }
    stats.sort_unstable_by(f64::total_cmp);
    let b = stats.len();
    let pick = |q: f64| stats[((q * (b - 1) as f64).round() as usize).min(b - 1)];
    let mean = stats.iter().sum::<f64>() / b as f64;
    let var_b = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (b - 1) as f64;
    Ok((distance, pick(0.025), pick(0.975), var_b.sqrt()))
}

/// Effective covariance estimated from the mean-squared-displacement curve.
#[derive(Debug, Clone)]
pub struct MsdEstimate {
    /// symmetrized slope matrix of cov(t) regressed through the origin,
    /// row-major n×n
    pub k_squared: Vec<f64>,
    /// bootstrap standard error per entry, row-major n×n
    pub standard_errors: Vec<f64>,
    /// record indices the regression used
    pub time_indices: Vec<usize>,
    pub resamples: usize,
}

/// Estimate K² by regressing the empirical covariance of the rescaled
/// displacement through the origin over the selected record times, with
/// path-level bootstrap standard errors.
pub fn msd_diffusivity(
    ensemble: &EnsembleResult,
    time_indices: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<MsdEstimate> {
    let paths = ensemble.path_count;
    let n = ensemble.n;
    if paths < 100 {
        return Err(Error::Statistics(format!(
            "{paths} paths is too few for a covariance estimate (need ≥ 100)"
        )));
    }
    if time_indices.is_empty() {
        return Err(Error::Validation("no record times selected".into()));
    }
    if let Some(&bad) = time_indices.iter().find(|&&i| i >= ensemble.records) {
        return Err(Error::Validation(format!(
            "record index {bad} out of range (ensemble has {})",
            ensemble.records
        )));
    }
    if resamples < 2 {
        return Err(Error::Validation("need at least 2 bootstrap resamples".into()));
    }
    let tt: f64 = time_indices.iter().map(|&r| ensemble.times[r].powi(2)).sum();
    if tt <= 0.0 {
        return Err(Error::Validation(
            "selected record times are all zero; the slope is undetermined".into(),
        ));
    }

    // slope of cov(t) through the origin from a set of path indices
    let slope_from = |idx: &[usize], out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let m = idx.len() as f64;
        let mut sum = vec![0.0f64; n];
        let mut prod = vec![0.0f64; n * n];
        for &r in time_indices {
            let t = ensemble.times[r];
            if t == 0.0 {
                continue;
            }
            sum.iter_mut().for_each(|v| *v = 0.0);
            prod.iter_mut().for_each(|v| *v = 0.0);
            for &p in idx {
                let d = ensemble.displacement_at(p, r);
                for a in 0..n {
                    sum[a] += d[a];
                    for b in a..n {
                        prod[a * n + b] += d[a] * d[b];
                    }
                }
            }
            for a in 0..n {
                for b in a..n {
                    let cov = (prod[a * n + b] - sum[a] * sum[b] / m) / (m - 1.0);
                    out[a * n + b] += t * cov;
                }
            }
        }
        for a in 0..n {
            for b in a..n {
                out[a * n + b] /= tt;
                out[b * n + a] = out[a * n + b];
            }
        }
    };

    let all: Vec<usize> = (0..paths).collect();
    let mut k_squared = vec![0.0f64; n * n];
    slope_from(&all, &mut k_squared);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; paths];
    let mut slopes = vec![0.0f64; resamples * n * n];
    let mut scratch = vec![0.0f64; n * n];
    for b in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..paths);
        }
        slope_from(&idx, &mut scratch);
        slopes[b * n * n..(b + 1) * n * n].copy_from_slice(&scratch);
    }
    let mut standard_errors = vec![0.0f64; n * n];
    for e in 0..n * n {
        let mean: f64 = (0..resamples).map(|b| slopes[b * n * n + e]).sum::<f64>()
            / resamples as f64;
        let var: f64 = (0..resamples)
            .map(|b| (slopes[b * n * n + e] - mean).powi(2))
            .sum::<f64>()
            / (resamples - 1) as f64;
        standard_errors[e] = var.sqrt();
    }

    Ok(MsdEstimate {
        k_squared,
        standard_errors,
        time_indices: time_indices.to_vec(),
        resamples,
    })
}

/// Outcome of fitting distance ≈ C·ε^α on a decreasing ε-grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateStudyResult {
    pub eps_grid: Vec<f64>,
    pub distances: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    /// least-squares slope of log distance vs log ε
    pub alpha_hat: f64,
    /// 95% interval for `alpha_hat` from parametric resampling of the
    /// per-point log-distances
    pub alpha_ci: (f64, f64),
    /// fitted log C (intercept)
    pub log_c: f64,
    /// true iff distances are nonincreasing within CIs and α̂ ≥ 0.3
    pub pass: bool,
    /// human-readable reasons when `pass` is false
    pub notes: Vec<String>,
}

/// Fit the empirical convergence rate.  The verdict passes when the
/// distances are compatible with a decay of exponent at least 0.3 —
/// deliberately below the theoretical ½ ceiling to absorb finite-ε and
/// finite-sample bias — and never increase beyond what the CIs allow.
/// A failed verdict is a result, not an error.
pub fn rate_fit(
    eps_grid: &[f64],
    distances: &[f64],
    cis: &[(f64, f64)],
    sample_sizes: &[usize],
    seed: u64,
) -> Result<RateStudyResult> {
    let m = eps_grid.len();
    if m < 3 {
        return Err(Error::Statistics(format!(
            "need at least 3 grid points to fit a rate, got {m}"
        )));
    }
    if distances.len() != m || cis.len() != m || sample_sizes.len() != m {
        return Err(Error::Validation(
            "eps grid, distances, CIs, and sample sizes must have equal lengths".into(),
        ));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) || eps_grid.iter().any(|&e| e <= 0.0 || e >= 1.0)
    {
        return Err(Error::Validation(
            "eps grid must be strictly decreasing within (0, 1)".into(),
        ));
    }
    if distances.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
        return Err(Error::Validation(
            "distances must be positive to fit a log-log rate".into(),
        ));
    }
    for (i, &(lo, hi)) in cis.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo > distances[i] || hi < distances[i] {
            return Err(Error::Validation(format!(
                "CI {i} [{lo}, {hi}] does not bracket its distance {}",
                distances[i]
            )));
        }
    }

    let xs: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let fit = |ys: &[f64]| -> (f64, f64) {
        let mf = m as f64;
        let xm = xs.iter().sum::<f64>() / mf;
        let ym = ys.iter().sum::<f64>() / mf;
        let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let slope = sxy / sxx;
        (slope, ym - slope * xm)
    };
    let (alpha_hat, log_c) = fit(&ys);

    // log-scale noise per point from the CI half-width; exact synthetic data
    // (degenerate CIs) gets zero noise and a degenerate α-interval
    let sig: Vec<f64> = cis
        .iter()
        .zip(distances)
        .map(|(&(lo, hi), &d)| {
            let lo = lo.max(d * 1e-6);
            ((hi / lo).ln() / (2.0 * 1.96)).max(0.0)
        })
        .collect();
    let alpha_ci = if sig.iter().all(|&s| s == 0.0) {
        (alpha_hat, alpha_hat)
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let reps = 1000;
        let mut alphas = Vec::with_capacity(reps);
        let mut perturbed = vec![0.0f64; m];
        for _ in 0..reps {
            for i in 0..m {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                perturbed[i] = ys[i] + sig[i] * g;
            }
            alphas.push(fit(&perturbed).0);
        }
        alphas.sort_unstable_by(f64::total_cmp);
        let pick = |q: f64| alphas[((q * (reps - 1) as f64).round() as usize).min(reps - 1)];
        (pick(0.025), pick(0.975))
    };

    let mut notes = Vec::new();
    for i in 0..m - 1 {
        // grid is decreasing in ε, so the distance at i+1 (smaller ε) must
        // not exceed the one at i beyond what the CIs can explain
        if cis[i + 1].0 > cis[i].1 {
            notes.push(format!(
                "distance increased from ε={} to ε={} beyond CI overlap ({} > {})",
                eps_grid[i],
                eps_grid[i + 1],
                cis[i + 1].0,
                cis[i].1
            ));
        }
    }
    if alpha_hat < 0.3 {
        notes.push(format!("fitted exponent {alpha_hat:.4} is below the 0.3 threshold"));
    }
    let pass = notes.is_empty();

    Ok(RateStudyResult {
        eps_grid: eps_grid.to_vec(),
        distances: distances.to_vec(),
        ci_lo: cis.iter().map(|c| c.0).collect(),
        ci_hi: cis.iter().map(|c| c.1).collect(),
        sample_sizes: sample_sizes.to_vec(),
        alpha_hat,
        alpha_ci,
        log_c,
        pass,
        notes,
    })
}


#[cfg(test)]
mod tests {
    use super::test_support::synthetic_brownian;
    use super::*;

    #[test]
    fn msd_recovers_an_injected_covariance() {
        // Brownian tracks with covariance diag(2,1): chol = diag(√2, 1)
        let chol = [2.0f64.sqrt(), 0.0, 0.0, 1.0];
        let e = synthetic_brownian(2, 600, 21, 4.0, &chol, 31);
        let idx: Vec<usize> = (1..e.records).collect();
        let est = msd_diffusivity(&e, &idx, 400, 5).unwrap();
        let truth = [2.0, 0.0, 0.0, 1.0];
        for i in 0..4 {
            let se = est.standard_errors[i].max(1e-12);
            assert!(
                (est.k_squared[i] - truth[i]).abs() < 3.0 * se,
                "entry {i}: {} vs {} (3se = {})",
                est.k_squared[i],
                truth[i],
                3.0 * se
            );
        }
        // symmetry is structural
        assert_eq!(est.k_squared[1], est.k_squared[2]);
    }

    #[test]
    fn msd_single_time_is_cov_over_t() {
        let chol = [1.0f64];
        let e = synthetic_brownian(1, 300, 11, 2.0, &chol, 8);
        let last = e.records - 1;
        let est = msd_diffusivity(&e, &[last], 50, 1).unwrap();
        // degenerate regression: slope = cov(T)/T exactly
        let t = e.times[last];
        let mean: f64 =
            (0..e.path_count).map(|p| e.displacement_at(p, last)[0]).sum::<f64>()
                / e.path_count as f64;
        let cov: f64 = (0..e.path_count)
            .map(|p| (e.displacement_at(p, last)[0] - mean).powi(2))
            .sum::<f64>()
            / (e.path_count - 1) as f64;
        assert!(
            (est.k_squared[0] - cov / t).abs() < 1e-14 * (cov / t),
            "{} vs {}",
            est.k_squared[0],
            cov / t
        );
    }

    #[test]
    fn msd_refuses_underpowered_ensembles() {
        let e = synthetic_brownian(1, 50, 5, 1.0, &[1.0], 0);
        let err = msd_diffusivity(&e, &[4], 10, 0).unwrap_err();
        assert_eq!(err.exit_code(), 5, "want a statistics error, got: {err}");
    }

    #[test]
    fn msd_is_unbiased_over_repetitions() {
        // 50 independent syntheses: the mean estimate should sit within one
        // standard error (of that mean) of the truth
        let mut estimates = Vec::new();
        for rep in 0..50u64 {
            let e = synthetic_brownian(1, 200, 9, 1.0, &[1.0], 1000 + rep);
            let idx: Vec<usize> = (1..e.records).collect();
            let est = msd_diffusivity(&e, &idx, 2, rep).unwrap();
            estimates.push(est.k_squared[0]);
        }
        let mean: f64 = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let sd: f64 = (estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (estimates.len() - 1) as f64)
            .sqrt();
        let se = sd / (estimates.len() as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < se,
            "mean estimate {mean} is more than one SE ({se}) from 1.0"
        );
    }

    #[test]
    fn endpoint_projection_matches_direct_wasserstein() {
        let e = synthetic_brownian(1, 500, 6, 1.0, &[1.0], 77);
        let f = ProjectionFunctional::Endpoint { k: vec![1.0] };
        let d = projection_distance(&e, &f, &[1.0], 2.0).unwrap();
        let endpoints: Vec<f64> = (0..e.path_count).map(|p| e.endpoint_of(p)[0]).collect();
        let direct = wasserstein_1d(&endpoints, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(d, direct);
        // the endpoint law IS the target here, so the distance is small
        assert!(d < 0.15, "self-distance {d} too large");

        // sign flip of k leaves the distance unchanged (symmetric target)
        let neg = ProjectionFunctional::Endpoint { k: vec![-1.0] };
        let dn = projection_distance(&e, &neg, &[1.0], 2.0).unwrap();
        assert!((d - dn).abs() < 1e-12, "k → −k moved the distance: {d} vs {dn}");
    }

    #[test]
    fn zero_functional_gives_zero_distance() {
        let e = synthetic_brownian(1, 200, 6, 1.0, &[1.0], 3);
        let f = ProjectionFunctional::Endpoint { k: vec![0.0] };
        let d = projection_distance(&e, &f, &[1.0], 2.0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn unit_ball_constraint_is_enforced() {
        let e = synthetic_brownian(2, 200, 6, 1.0, &[1.0, 0.0, 0.0, 1.0], 3);
        let f = ProjectionFunctional::Endpoint { k: vec![1.0, 0.1] };
        assert!(projection_distance(&e, &f, &[1.0, 0.0, 0.0, 1.0], 2.0).is_err());

        // a time average with ∫|w| > 1 is rejected even if ‖k‖ = 1
        let w = vec![2.0; e.records];
        let f = ProjectionFunctional::TimeAverage { k: vec![1.0, 0.0], weights: w };
        assert!(projection_distance(&e, &f, &[1.0, 0.0, 0.0, 1.0], 2.0).is_err());
    }

    #[test]
    fn time_average_limit_variance_is_exact_for_brownian_input() {
        // constant weight w over [0,T]: Var ∫₀ᵀ w·B dt = w²·T³/3 for unit
        // covariance; check the quadrature against the closed form, then the
        // sampled distance against that target
        let t_final = 1.0;
        let e = synthetic_brownian(1, 4000, 41, t_final, &[1.0], 19);
        let w = 0.9; // keep the TV norm below 1
        let f = ProjectionFunctional::TimeAverage {
            k: vec![1.0],
            weights: vec![w; e.records],
        };
        let var = f.limit_variance(&e.times, &[1.0]);
        // trapezoid double sum of min(s,t) has O(dt²) error
        let exact = w * w * t_final.powi(3) / 3.0;
        assert!(
            (var - exact).abs() < 2e-3 * exact,
            "quadrature variance {var} vs closed form {exact}"
        );
        let d = projection_distance(&e, &f, &[1.0], 2.0).unwrap();
        // the time average of the sampled Brownian paths follows the target
        // law up to record-grid discretization, so the distance is small
        assert!(d < 0.05, "time-average distance {d} unexpectedly large");
    }

    #[test]
    fn isotropic_directions_are_statistically_indistinguishable() {
        let chol = [1.0, 0.0, 0.0, 1.0];
        let e = synthetic_brownian(2, 3000, 6, 1.0, &chol, 101);
        let k2 = [1.0, 0.0, 0.0, 1.0];
        let f1 = ProjectionFunctional::Endpoint { k: vec![1.0, 0.0] };
        let f2 = ProjectionFunctional::Endpoint { k: vec![0.0, 1.0] };
        let (d1, lo1, hi1, _) =
            projection_distance_with_ci(&e, &f1, &k2, 2.0, 400, 11).unwrap();
        let (d2, lo2, hi2, _) =
            projection_distance_with_ci(&e, &f2, &k2, 2.0, 400, 12).unwrap();
        assert!(lo1 <= d1 && d1 <= hi1);
        assert!(lo2 <= d2 && d2 <= hi2);
        assert!(
            lo1.max(lo2) <= hi1.min(hi2),
            "orthogonal projections have disjoint CIs: [{lo1},{hi1}] vs [{lo2},{hi2}]"
        );
    }

    #[test]
    fn rate_fit_recovers_an_exact_power_law() {
        let eps: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
        let d: Vec<f64> = eps.iter().map(|e| 2.5 * e.powf(0.5)).collect();
        let cis: Vec<(f64, f64)> = d.iter().map(|&x| (x, x)).collect();
        let r = rate_fit(&eps, &d, &cis, &[100; 4], 0).unwrap();
        assert!((r.alpha_hat - 0.5).abs() < 1e-12, "α̂ = {}", r.alpha_hat);
        assert!((r.log_c - 2.5f64.ln()).abs() < 1e-12);
        assert_eq!(r.alpha_ci, (r.alpha_hat, r.alpha_hat));
        assert!(r.pass, "exact half-power data must pass: {:?}", r.notes);
    }

    #[test]
    fn rate_fit_fails_flat_and_increasing_data() {
        let eps = [0.4, 0.2, 0.1];
        let flat = [0.2, 0.2, 0.2];
        let cis: Vec<(f64, f64)> = flat.iter().map(|&x| (x * 0.99, x * 1.01)).collect();
        let r = rate_fit(&eps, &flat, &cis, &[10; 3], 0).unwrap();
        assert!(!r.pass, "flat distances must fail");
        assert!(r.notes.iter().any(|n| n.contains("below the 0.3 threshold")));

        let rising = [0.1, 0.2, 0.4];
        let cis: Vec<(f64, f64)> = rising.iter().map(|&x| (x * 0.99, x * 1.01)).collect();
        let r = rate_fit(&eps, &rising, &cis, &[10; 3], 0).unwrap();
        assert!(!r.pass);
        assert!(r.notes.iter().any(|n| n.contains("increased")), "{:?}", r.notes);
    }

    #[test]
    fn rate_fit_validates_its_inputs() {
        let cis = [(0.1, 0.3), (0.1, 0.3)];
        let err = rate_fit(&[0.4, 0.2], &[0.2, 0.2], &cis, &[10, 10], 0).unwrap_err();
        assert_eq!(err.exit_code(), 5, "single/double point must be a statistics error");

        // non-decreasing grid
        assert!(rate_fit(
            &[0.2, 0.2, 0.1],
            &[0.3, 0.2, 0.1],
            &[(0.2, 0.4), (0.1, 0.3), (0.05, 0.2)],
            &[10; 3],
            0
        )
        .is_err());

        // zero distance cannot be log-fitted
        assert!(rate_fit(
            &[0.4, 0.2, 0.1],
            &[0.3, 0.0, 0.1],
            &[(0.2, 0.4), (0.0, 0.1), (0.05, 0.2)],
            &[10; 3],
            0
        )
        .is_err());
    }

    #[test]
    fn rate_fit_ci_tracks_noise_level() {
        // noisy CIs should widen the α interval around a genuine 0.5 slope
        let eps: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
        let d: Vec<f64> = eps.iter().map(|e| 1.3 * e.powf(0.5)).collect();
        let cis: Vec<(f64, f64)> = d.iter().map(|&x| (x * 0.8, x * 1.25)).collect();
        let r = rate_fit(&eps, &d, &cis, &[100; 4], 42).unwrap();
        assert!(r.alpha_ci.0 < 0.5 && 0.5 < r.alpha_ci.1, "CI {:?}", r.alpha_ci);
        assert!(r.alpha_ci.1 - r.alpha_ci.0 > 0.05, "CI should be visibly wide");
        assert!(r.pass);
    }
}
