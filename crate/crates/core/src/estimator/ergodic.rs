//! Empirical relaxation to the invariant measure.
//!
//! For a fixed observable ψ the ensemble average E ψ(x_t, y_t) approaches
//! the invariant mean ∫ψ dμ exponentially fast.  This module runs an
//! unscaled, uncentered ensemble (ε = 1, no ballistic subtraction), tracks
//! the gap to the invariant mean on the record grid, and fits an
//! exponential rate to the part of the curve that stands above the Monte
//! Carlo noise floor.

use crate::error::{Error, Result};
use crate::integrator::{run_ensemble, InitialLaw, IntegratorConfig};
use crate::model::{DriftSpec, ModelParams};

/// Relaxation curve of one observable plus the fitted exponential.
#[derive(Debug, Clone)]
pub struct DecayCurve {
    /// record times (microscopic — the run uses ε = 1)
    pub times: Vec<f64>,
    /// E ψ(x_t, y_t) − μ-mean per record
    pub values: Vec<f64>,
    /// Monte Carlo standard error per record
    pub standard_errors: Vec<f64>,
    /// the invariant mean that was subtracted
    pub mu_mean: f64,
    /// 3 × the largest standard error; fit points must clear it
    pub noise_floor: f64,
    /// leading records used for the log-linear fit
    pub fit_points: usize,
    /// fitted δ in |values| ≈ amplitude·e^{−δt}
    pub fitted_rate: f64,
    /// standard error of the fitted rate from the regression residuals
    pub rate_se: f64,
    pub fitted_amplitude: f64,
    /// true when the curve is identically zero (already equilibrated) or
    /// the fitted rate is positive beyond two of its standard errors
    pub consistent_with_decay: bool,
}

/// Estimate E ψ(x_t, y_t) − ∫ψdμ on the record grid of `config` and fit an
/// exponential decay to it.
///
/// The caller supplies the invariant mean (typically from the spectral
/// density contraction) and guarantees ψ is dominated by exp(‖σ⁻¹y‖²/2).
/// Paths start from `initial` and the dynamics run unscaled: record times
/// are microscopic and nothing is centered or rescaled.
pub fn ergodicity_decay<F>(
    psi: F,
    params: &ModelParams,
    drift: &DriftSpec,
    config: &IntegratorConfig,
    initial: &InitialLaw,
    mu_mean: f64,
) -> Result<DecayCurve>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if !mu_mean.is_finite() {
        return Err(Error::Validation(format!("invariant mean must be finite, got {mu_mean}")));
    }
    let zero_v = vec![0.0f64; params.n];
    let ensemble = run_ensemble(params, drift, config, 1.0, &zero_v, initial)?;
    let records = ensemble.records;
    let paths = ensemble.path_count;

    let mut values = Vec::with_capacity(records);
    let mut standard_errors = Vec::with_capacity(records);
    for r in 0..records {
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for p in 0..paths {
            let (x, y) = ensemble.phase_at(p, r);
            let v = psi(x, y);
            if !v.is_finite() {
                return Err(Error::Statistics(format!(
                    "observable returned {v} at record {r}; decay curve is undefined"
                )));
            }
            sum += v;
            sumsq += v * v;
        }
        let m = paths as f64;
        let mean = sum / m;
        let se = if paths > 1 {
            let var = ((sumsq - sum * sum / m) / (m - 1.0)).max(0.0);
            (var / m).sqrt()
        } else {
            0.0
        };
        values.push(mean - mu_mean);
        standard_errors.push(se);
    }

    let se_max = standard_errors.iter().copied().fold(0.0f64, f64::max);
    let noise_floor = 3.0 * se_max;

    // identically-zero curve: the observable is already at its mean
    if values.iter().all(|&v| v == 0.0) {
        return Ok(DecayCurve {
            times: ensemble.times,
            values,
            standard_errors,
            mu_mean,
            noise_floor,
            fit_points: 0,
            fitted_rate: 0.0,
            rate_se: 0.0,
            fitted_amplitude: 0.0,
            consistent_with_decay: true,
        });
    }

    // nothing rises above the noise: the sample cannot power the fit
    let max_abs = values.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
    if se_max > 0.0
        && values[0].abs() <= 2.0 * standard_errors[0]
        && max_abs <= 2.0 * se_max
    {
        return Err(Error::Statistics(format!(
            "observable variance is too large for {paths} paths: the whole curve \
             (max |value| = {max_abs:.3e}) sits within twice the standard error \
             ({se_max:.3e}); increase the path count or start further from equilibrium"
        )));
    }

    // fit the leading stretch that clears the per-record noise floor
    let mut fit_points = 0;
    while fit_points < records {
        let v = values[fit_points].abs();
        if v > 3.0 * standard_errors[fit_points] && v > 0.0 {
            fit_points += 1;
        } else {
            break;
        }
    }
    if fit_points < 3 {
        return Err(Error::Statistics(format!(
            "only {fit_points} leading records clear the noise floor; need at least 3 \
             to fit a rate (refine the record grid or add paths)"
        )));
    }

    let ts = &ensemble.times[..fit_points];
    let ys: Vec<f64> = values[..fit_points].iter().map(|v| v.abs().ln()).collect();
    let m = fit_points as f64;
    let tm = ts.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sxy: f64 = ts.iter().zip(&ys).map(|(t, y)| (t - tm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rss: f64 = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let rate_se = if fit_points > 2 {
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let fitted_rate = -slope;
    let consistent_with_decay = fitted_rate > 0.0 && fitted_rate > 2.0 * rate_se;

    Ok(DecayCurve {
        times: ensemble.times,
        values,
        standard_errors,
        mu_mean,
        noise_floor,
        fit_points,
        fitted_rate,
        rate_se,
        fitted_amplitude: intercept.exp(),
        consistent_with_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::Scheme;
    use crate::model::{preset_cosine_gradient, preset_flat};
    use num_complex::Complex64;

    #[test]
    fn constant_observable_gives_the_zero_curve() {
        let params = ModelParams::new(0.5, 1.0, 1).unwrap();
        let drift = preset_flat();
        let mut config = IntegratorConfig::new(0.01, 0.5, Scheme::SplittingStrang, 3, 17);
        config.records = 5;
        let initial = InitialLaw::FixedPoint { x0: vec![0.2], y0: vec![0.4] };
        let curve = ergodicity_decay(|_, _| 1.0, &params, &drift, &config, &initial, 1.0).unwrap();
        assert!(curve.values.iter().all(|&v| v == 0.0));
        assert!(curve.consistent_with_decay);
        assert_eq!(curve.fitted_rate, 0.0);
        assert_eq!(curve.fit_points, 0);
    }

    #[test]
    fn speed_observable_relaxes_at_two_over_tau() {
        // v = 0, y₀ = 0: E‖y_t‖² − σ²/2 = −(σ²/2)e^{−2t/τ}, exactly
        // log-linear, so the fit recovers 2/τ up to Monte Carlo noise
        let tau = 0.5;
        let sigma = 1.1;
        let params = ModelParams::new(tau, sigma, 1).unwrap();
        let drift = preset_flat();
        let mut config = IntegratorConfig::new(5e-3, 0.5, Scheme::SplittingStrang, 11, 6000);
        config.records = 6;
        let initial = InitialLaw::FixedPoint { x0: vec![0.0], y0: vec![0.0] };
        let mu_mean = sigma * sigma / 2.0;
        let curve = ergodicity_decay(
            |_, y| y.iter().map(|v| v * v).sum(),
            &params,
            &drift,
            &config,
            &initial,
            mu_mean,
        )
        .unwrap();
        let want = 2.0 / tau;
        let tol = (3.0 * curve.rate_se).max(0.12 * want);
        assert!(
            (curve.fitted_rate - want).abs() < tol,
            "fitted rate {} ± {} vs {want}",
            curve.fitted_rate,
            curve.rate_se
        );
        assert!(curve.consistent_with_decay);
        assert!(curve.fit_points >= 4, "fit used only {} points", curve.fit_points);
        // amplitude ≈ σ²/2
        assert!(
            (curve.fitted_amplitude - mu_mean).abs() < 0.2 * mu_mean,
            "amplitude {} vs {mu_mean}",
            curve.fitted_amplitude
        );
        // the t = 0 value is deterministic: exactly −σ²/2
        assert_eq!(curve.values[0], -mu_mean);
        assert_eq!(curve.standard_errors[0], 0.0);
    }

    #[test]
    fn gradient_drift_equilibrates_to_the_spectral_mean() {
        // cos(2πx) under the cosine-gradient drift: the invariant mean comes
        // from the spectral density, and the late-time curve must sit on it
        let params = ModelParams::new(0.25, 1.0, 1).unwrap();
        let drift = preset_cosine_gradient();
        let pipe = crate::spectral::run_pipeline(&drift, &params, 12, 10).unwrap();
        let basis = pipe.density.g.basis().clone();
        let mut psi_field = crate::spectral::CoefficientField::zero(basis);
        psi_field.set(&[1], &[0], Complex64::new(0.5, 0.0));
        psi_field.set(&[-1], &[0], Complex64::new(0.5, 0.0));
        let mu = psi_field.contract_density(&pipe.density.g);
        assert!(mu.im.abs() < 1e-12);
        let mu_mean = mu.re;
        // the marginal is ∝ e^{−cos(2πx)}, so the mean has the Bessel closed
        // form −I₁(1)/I₀(1)
        let bessel = -0.446_389_965_896_534_5;
        assert!(
            (mu_mean - bessel).abs() < 1e-9,
            "μ-mean {mu_mean} vs closed form {bessel}"
        );

        let mut config = IntegratorConfig::new(5e-3, 3.0, Scheme::SplittingStrang, 23, 4000);
        config.records = 121;
        let initial = InitialLaw::FixedPoint { x0: vec![0.1], y0: vec![0.4] };
        let curve = ergodicity_decay(
            |x, _| (2.0 * std::f64::consts::PI * x[0]).cos(),
            &params,
            &drift,
            &config,
            &initial,
            mu_mean,
        )
        .unwrap();
        assert!(curve.consistent_with_decay, "no decay detected: rate {}", curve.fitted_rate);
        assert!(curve.fitted_rate > 0.0);
        let last = curve.values.len() - 1;
        let slack = (3.0 * curve.standard_errors[last]).max(0.02 * curve.values[0].abs());
        assert!(
            curve.values[last].abs() < slack,
            "curve has not equilibrated to the quadrature mean: residual {} vs slack {slack}",
            curve.values[last]
        );
    }

    #[test]
    fn equilibrium_start_with_few_paths_is_a_power_error() {
        // starting ‖y‖² at its invariant mean leaves nothing but noise, and
        // 30 paths cannot resolve that
        let tau = 0.5;
        let sigma = 1.0;
        let params = ModelParams::new(tau, sigma, 1).unwrap();
        let drift = preset_flat();
        let mut config = IntegratorConfig::new(0.01, 1.0, Scheme::SplittingStrang, 9, 30);
        config.records = 8;
        let y0 = (sigma * sigma / 2.0).sqrt();
        let initial = InitialLaw::FixedPoint { x0: vec![0.0], y0: vec![y0] };
        let err = ergodicity_decay(
            |_, y| y.iter().map(|v| v * v).sum(),
            &params,
            &drift,
            &config,
            &initial,
            sigma * sigma / 2.0,
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 5, "want a statistics error, got: {err}");
    }
}
