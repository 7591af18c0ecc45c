//! Pathwise check of the corrector decomposition.
//!
//! With Φ the centered cell solution, the rescaled centered displacement
//! splits as
//!
//! ```text
//!   disp_ε(t) − disp_ε(0) = M^ε(t) − ε·(Φ(z_t) − Φ(z_0)),
//! ```
//!
//! where M^ε is a martingale whose quadratic variation grows like
//! t·⟨k, K²k⟩ after projection onto k.  This module reconstructs M^ε on the
//! record grid from an ensemble plus the spectral Φ, and reports how well
//! the quadratic variation matches the effective diffusivity, how large the
//! corrector excursion ε·ΔΦ stays (it should vanish like √ε), and whether
//! the decomposition closes to roundoff.

use crate::error::{Error, Result};
use crate::estimator::ProjectionFunctional;
use crate::integrator::EnsembleResult;
use crate::spectral::CoefficientField;

/// Outcome of [`martingale_decomposition_check`].
#[derive(Debug, Clone)]
pub struct MartingaleReport {
    pub eps: f64,
    pub paths_checked: usize,
    /// mean over paths of Σ_r ⟨k, ΔM^ε⟩² on the record grid
    pub qv_projected_mean: f64,
    /// T·⟨k, K²k⟩ over the record horizon
    pub qv_expected: f64,
    /// |qv_projected_mean / qv_expected − 1|
    pub qv_relative_error: f64,
    /// per-path sup_r |ε⟨k, Φ(z_r) − Φ(z_0)⟩|, averaged over paths
    pub corrector_sup_mean: f64,
    /// the same sup, maximized over paths
    pub corrector_sup_max: f64,
    /// largest gap between the directly evaluated martingale and its
    /// increment-accumulated form — pure floating-point reassociation,
    /// so anything above roundoff indicates a bookkeeping bug
    pub decomposition_max_residual: f64,
    /// records where some |y_j| left the Hermite trust region (6β), making
    /// the Φ evaluation an extrapolation
    pub extrapolation_warnings: usize,
}

/// Reconstruct the projected martingale along every recorded path and
/// summarize its quadratic variation and corrector statistics.
///
/// `phi` is the spectral cell solution (one coefficient field per space
/// dimension), `k2` the effective covariance (row-major n×n) to test
/// against, and the functional supplies the projection direction k from the
/// unit ball.
pub fn martingale_decomposition_check(
    ensemble: &EnsembleResult,
    phi: &[CoefficientField],
    k2: &[f64],
    functional: &ProjectionFunctional,
) -> Result<MartingaleReport> {
    let n = ensemble.n;
    let eps = ensemble.eps;
    if phi.len() != n {
        return Err(Error::Validation(format!(
            "corrector has {} components for dimension {n}",
            phi.len()
        )));
    }
    if k2.len() != n * n {
        return Err(Error::Validation(format!(
            "K² has {} entries, expected {}",
            k2.len(),
            n * n
        )));
    }
    let k = functional.k();
    if k.len() != n {
        return Err(Error::Validation(format!(
            "projection direction has length {}, expected {n}",
            k.len()
        )));
    }
    functional.validate(&ensemble.times)?;
    if ensemble.records < 2 {
        return Err(Error::Validation(
            "need at least 2 records to form martingale increments".into(),
        ));
    }

    // trust region of the Hermite expansion: the weight is N(0, β²) per
    // component, so |y| ≫ β means Φ is evaluated where nothing constrained it
    let beta = ensemble_beta(phi);
    let trust = 6.0 * beta;

    // ⟨k, Φ(z)⟩, skipping zero components of k
    let active: Vec<usize> = (0..n).filter(|&j| k[j] != 0.0).collect();
    let project_phi = |x: &[f64], y: &[f64]| -> Result<f64> {
        let mut acc = 0.0;
        for &j in &active {
            acc += k[j] * phi[j].eval_real(x, y)?;
        }
        Ok(acc)
    };
    let project = |d: &[f64]| -> f64 { k.iter().zip(d).map(|(a, b)| a * b).sum() };

    let mut qv_sum = 0.0f64;
    let mut sup_sum = 0.0f64;
    let mut sup_max = 0.0f64;
    let mut max_residual = 0.0f64;
    let mut warnings = 0usize;

    for p in 0..ensemble.path_count {
        let (x0, y0) = ensemble.phase_at(p, 0);
        let c0 = project_phi(x0, y0)?;
        let d0 = project(ensemble.displacement_at(p, 0));
        if y0.iter().any(|v| v.abs() > trust) {
            warnings += 1;
        }
        let mut prev_c = c0;
        let mut prev_d = d0;
        let mut m_accum = 0.0f64;
        let mut qv = 0.0f64;
        let mut sup = 0.0f64;
        for r in 1..ensemble.records {
            let (x, y) = ensemble.phase_at(p, r);
            if y.iter().any(|v| v.abs() > trust) {
                warnings += 1;
            }
            let c = project_phi(x, y)?;
            let d = project(ensemble.displacement_at(p, r));
            let dm = (d - prev_d) + eps * (c - prev_c);
            m_accum += dm;
            qv += dm * dm;
            let m_direct = (d - d0) + eps * (c - c0);
            max_residual = max_residual.max((m_accum - m_direct).abs());
            sup = sup.max((eps * (c - c0)).abs());
            prev_c = c;
            prev_d = d;
        }
        qv_sum += qv;
        sup_sum += sup;
        sup_max = sup_max.max(sup);
    }

    let paths = ensemble.path_count as f64;
    let qv_projected_mean = qv_sum / paths;
    let horizon = ensemble.times.last().unwrap() - ensemble.times[0];
    let kk2k: f64 = (0..n)
        .map(|a| (0..n).map(|b| k[a] * k2[a * n + b] * k[b]).sum::<f64>())
        .sum();
    let qv_expected = horizon * kk2k;
    let qv_relative_error = if qv_expected == 0.0 {
        if qv_projected_mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (qv_projected_mean / qv_expected - 1.0).abs()
    };

    Ok(MartingaleReport {
        eps,
        paths_checked: ensemble.path_count,
        qv_projected_mean,
        qv_expected,
        qv_relative_error,
        corrector_sup_mean: sup_sum / paths,
        corrector_sup_max: sup_max,
        decomposition_max_residual: max_residual,
        extrapolation_warnings: warnings,
    })
}

fn ensemble_beta(phi: &[CoefficientField]) -> f64 {
    phi.first().map(|f| f.basis().hermite_scale()).unwrap_or(1.0)
}
