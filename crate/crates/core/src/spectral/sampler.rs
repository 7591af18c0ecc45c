//! Accept–reject sampling of the invariant measure.
//!
//! The proposal is the v = 0 law — uniform(x) ⊗ N(0, β²I)(y) — under which
//! the target density is exactly the weight g(x, y).  The envelope constant
//! is the grid maximum of g with no safety factor, so for v = 0 (g ≡ 1)
//! every proposal is accepted and the sampler degenerates to drawing from
//! the product law directly.  Between grid points g may poke slightly above
//! the envelope; those proposals are clip-accepted, so the sampled law is
//! exact up to the envelope's grid resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::PhaseState;
use crate::spectral::quadrature::grid_eval;
use crate::spectral::solve::InvariantDensity;

/// Draw `count` states distributed according to μ, deterministically in
/// `seed`.  Errors if the envelope is degenerate or the acceptance rate
/// collapses below 1e-3 (a converged positive density at sane cutoffs
/// cannot get that peaked relative to its mean — the guard catches
/// numerically broken inputs, not hard targets).
pub fn sample_invariant_measure(
    density: &InvariantDensity,
    count: usize,
    seed: u64,
) -> Result<Vec<PhaseState>> {
    let (states, _) = sample_with_rate(density, count, seed)?;
    Ok(states)
}

/// As `sample_invariant_measure`, additionally reporting the realized
/// acceptance rate.
pub fn sample_with_rate(
    density: &InvariantDensity,
    count: usize,
    seed: u64,
) -> Result<(Vec<PhaseState>, f64)> {
    let basis = density.g.basis();
    let n = basis.dim();
    let beta = basis.hermite_scale();

    // envelope: exact grid maximum of g, x resolved past the Fourier
    // content, z covering ±6 proposal standard deviations
    let mx = 4 * basis.fourier_cutoff() + 1;
    let xs: Vec<Vec<f64>> = vec![(0..mx).map(|i| i as f64 / mx as f64).collect(); n];
    let zs: Vec<Vec<f64>> = vec![(0..25).map(|i| -6.0 + 12.0 * i as f64 / 24.0).collect(); n];
    let g_max = grid_eval(&density.g, &xs, &zs)
        .iter()
        .map(|v| v.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(g_max.is_finite() && g_max > 0.0) {
        return Err(Error::Solver(format!(
            "envelope failure: grid maximum of g is {g_max}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut proposals = 0usize;
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    while out.len() < count {
        proposals += 1;
        for xj in x.iter_mut() {
            *xj = rng.gen::<f64>();
        }
        for yj in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *yj = beta * z;
        }
        let u: f64 = rng.gen();
        // clip-accept when g exceeds the envelope between grid points
        if u * g_max <= density.g.eval(&x, &y).re {
            out.push(PhaseState::new(&x, &y));
        }
        if proposals >= 10_000 && (out.len() as f64) < 1e-3 * proposals as f64 {
            return Err(Error::Solver(format!(
                "envelope failure: acceptance rate {:.2e} after {proposals} proposals",
                out.len() as f64 / proposals as f64
            )));
        }
    }
    Ok((out, count as f64 / proposals as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset_cosine_gradient, DriftSpec, ModelParams};
    use crate::spectral::basis::{Basis, CoefficientField};
    use crate::spectral::operator::assemble_generator;
    use crate::spectral::solve::invariant_density;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn density_for(drift: &DriftSpec, tau: f64, sigma: f64, n_f: usize, n_h: usize) -> (ModelParams, InvariantDensity) {
        let params = ModelParams::new(tau, sigma, drift.dim()).unwrap();
        let basis = Basis::new(&params, n_f, n_h).unwrap();
        let op = assemble_generator(drift, &params, &basis).unwrap();
        (params, invariant_density(&op).unwrap())
    }

    #[test]
    fn zero_drift_accepts_every_proposal() {
        let (_, density) = density_for(&DriftSpec::zero(1), 0.7, 1.2, 4, 8);
        let (states, rate) = sample_with_rate(&density, 500, 42).unwrap();
        assert_eq!(states.len(), 500);
        assert_eq!(rate, 1.0, "proposal equals target for v = 0");
    }

    #[test]
    fn gibbs_marginal_moments_match_quadrature() {
        let sigma = 1.1;
        let drift = preset_cosine_gradient();
        let (params, density) = density_for(&drift, 0.5, sigma, 8, 10);
        let n_samples = 4000;
        let states = sample_invariant_measure(&density, n_samples, 7).unwrap();

        // quadrature moments of the Gibbs x-marginal ∝ e^{−2V/σ²}
        let m = 2048;
        let (mut z, mut mc, mut ms) = (0.0, 0.0, 0.0);
        for i in 0..m {
            let x = i as f64 / m as f64;
            let w = (-(2.0 / (sigma * sigma)) * 0.5 * (2.0 * PI * x).cos()).exp();
            z += w;
            mc += w * (2.0 * PI * x).cos();
            ms += w * (2.0 * PI * x).sin();
        }
        let (want_cos, want_sin) = (mc / z, ms / z);

        let cs: Vec<f64> = states.iter().map(|s| (2.0 * PI * s.x[0]).cos()).collect();
        let ss: Vec<f64> = states.iter().map(|s| (2.0 * PI * s.x[0]).sin()).collect();
        for (got, want) in [(cs, want_cos), (ss, want_sin)] {
            let mean = got.iter().sum::<f64>() / n_samples as f64;
            let var = got.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n_samples - 1) as f64;
            let se = (var / n_samples as f64).sqrt();
            assert!(
                (mean - want).abs() < 3.0 * se,
                "moment {mean} vs quadrature {want} (3se = {})",
                3.0 * se
            );
        }

        // y-marginal is exactly N(0, β²) regardless of the drift
        let beta2 = params.sigma * params.sigma / 2.0;
        let m2 = states.iter().map(|s| s.y[0] * s.y[0]).sum::<f64>() / n_samples as f64;
        // Var(y²) = 2β⁴ for a Gaussian
        let se = (2.0 * beta2 * beta2 / n_samples as f64).sqrt();
        assert!((m2 - beta2).abs() < 3.0 * se, "E[y²] = {m2} vs β² = {beta2}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let drift = preset_cosine_gradient();
        let (_, density) = density_for(&drift, 0.5, 1.1, 6, 8);
        let a = sample_invariant_measure(&density, 50, 99).unwrap();
        let b = sample_invariant_measure(&density, 50, 99).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.y, sb.y);
        }
        let c = sample_invariant_measure(&density, 50, 100).unwrap();
        assert!(a.iter().zip(&c).any(|(sa, sc)| sa.x != sc.x));
    }

    #[test]
    fn degenerate_envelope_is_an_error() {
        let params = ModelParams::new(0.7, 1.2, 1).unwrap();
        let basis = Basis::new(&params, 4, 8).unwrap();
        let broken = InvariantDensity {
            g: CoefficientField::zero(Arc::clone(&basis)),
            residual: 0.0,
            kernel_gap: 1.0,
            grid_min: 0.0,
        };
        let err = sample_invariant_measure(&broken, 10, 1).unwrap_err();
        assert!(err.to_string().contains("envelope"), "got: {err}");
    }
}
