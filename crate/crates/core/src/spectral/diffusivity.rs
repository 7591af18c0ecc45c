//! Effective diffusivity from the solved cell problems.
//!
//! With the corrector components Φ_a in hand, the homogenized covariance is
//!
//! ```text
//!   K²_ab = (σ²/τ) ∫ ∇_yΦ_a · ∇_yΦ_b dμ,      dμ = g(x,y) dx φ_β(y) dy
//! ```
//!
//! That gradient form must *not* be evaluated verbatim on the truncated
//! fields.  It is trilinear in Hermite series — two gradient factors plus
//! the density — and the triple-product pairing grows combinatorially with
//! degree while the coefficients only decay geometrically.  Whenever the
//! density carries slowly-decaying velocity content (every non-gradient
//! drift), the exact integral of the *truncated* product genuinely diverges
//! as the cutoff grows: the polynomial tails of the factors outrun the
//! Gaussian weight, and past ~40 Hermite levels the computed "K²" is pure
//! tail artifact, by many orders of magnitude.  No quadrature or clever
//! summation fixes this — it is a property of the formula, not of rounding.
//!
//! The implementation instead uses the carré-du-champ polarization identity.
//! Invariance of μ gives ⟨LΦ_a,Φ_b⟩_μ + ⟨Φ_a,LΦ_b⟩_μ = −(σ²/τ)∫∇_yΦ_a·∇_yΦ_b dμ,
//! so with the cell equation −LΦ_j = R_j = y_j/√τ − v̄_j,
//!
//! ```text
//!   K²_ab = ∫ (R_a Φ_b + R_b Φ_a) dμ
//! ```
//!
//! R_j has Hermite degree one, so this pairing is *bilinear* in the decaying
//! tails and converges absolutely; it agrees with the gradient form in the
//! limit, and the tests assert the agreement on gradient presets where both
//! forms are stable.  The μ-integral itself is evaluated by tensor
//! quadrature — an equispaced x-rule with 3·N_F + 1 points and a
//! Gauss–Hermite z-rule covering degree 3·N_H, both exact for the truncated
//! degrees at hand — with Gaussian-damped field evaluations so that no
//! stored node value can overflow at any cutoff.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DriftSpec, ModelParams};
use crate::spectral::basis::{Basis, CoefficientField};
use crate::spectral::operator::assemble_generator;
use crate::spectral::quadrature::QuadratureRule;
use crate::spectral::solve::{
    invariant_density, mean_drift, solve_cell_problem, CellSolution, InvariantDensity,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// μ-integrals of products of two coefficient fields against a fixed density
/// g: the exact product rule plus the density pre-evaluated on its grid.
///
/// All three factors in ∫ f·h·g dμ₀ enter through `eval_damped`, so the
/// stored values stay bounded by coefficient norms; the weights are boosted
/// by the three spent damp factors when the density grid is built.
pub(crate) struct MuIntegrator {
    rule: QuadratureRule,
    /// damped g on the rule's grid, fused with the boosted weights
    g_weighted: Vec<Complex64>,
}

impl MuIntegrator {
    pub fn new(g: &CoefficientField) -> Self {
        let rule = QuadratureRule::for_triple_products(g.basis());
        let mut g_weighted = rule.eval_damped(g);
        for ((v, &w), &d) in g_weighted.iter_mut().zip(&rule.weights).zip(&rule.damp) {
            *v *= w / (d * d * d);
        }
        MuIntegrator { rule, g_weighted }
    }

    /// Damped field values on the rule's grid, ready for `gram`.
    pub fn values(&self, f: &CoefficientField) -> Vec<Complex64> {
        self.rule.eval_damped(f)
    }

    /// ∫ f·h dμ for real fields on the same basis (real part returned; the
    /// imaginary part is pure rounding when the inputs are real fields).
    #[cfg(test)]
    pub fn integrate(&self, f: &CoefficientField, h: &CoefficientField) -> f64 {
        self.gram(&[&self.values(f)], &[&self.values(h)])[0]
    }

    /// All pairwise integrals over pre-evaluated value grids:
    /// out[i * right.len() + j] = ∫ left_i · right_j dμ.
    fn gram(&self, left: &[&[Complex64]], right: &[&[Complex64]]) -> Vec<f64> {
        let mut acc = vec![ZERO; left.len() * right.len()];
        for (p, &gw) in self.g_weighted.iter().enumerate() {
            if gw == ZERO {
                continue;
            }
            for (i, lf) in left.iter().enumerate() {
                for (j, rf) in right.iter().enumerate() {
                    acc[i * right.len() + j] += lf[p] * rf[p] * gw;
                }
            }
        }
        acc.iter().map(|v| v.re).collect()
    }
}

/// The homogenized covariance matrix with its diagnostics.
#[derive(Debug, Clone)]
pub struct DiffusivityResult {
    pub n: usize,
    /// row-major n×n symmetric matrix
    pub matrix: Vec<f64>,
    /// ‖M − Mᵀ‖_F — zero by construction under the polarization identity
    pub asymmetry: f64,
    /// eigenvalues, ascending
    pub eigenvalues: Vec<f64>,
    /// unpinned cell-problem residuals, one per component
    pub cell_residuals: Vec<f64>,
    pub n_fourier: usize,
    pub n_hermite: usize,
}

impl DiffusivityResult {
    pub fn component(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.n + b]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn frobenius(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// K² = (σ²/τ) ∫ ∇_yΦ ⊗ ∇_yΦ dμ from the solved cell problems, computed
/// through the polarization identity K²_ab = ∫ (R_a Φ_b + R_b Φ_a) dμ with
/// R_j = y_j/√τ − v̄_j (see the module docs for why the gradient form is
/// not evaluated directly).
pub fn effective_diffusivity(
    cell: &CellSolution,
    density: &InvariantDensity,
    v_bar: &[f64],
    params: &ModelParams,
) -> Result<DiffusivityResult> {
    let n = params.n;
    let basis = Arc::clone(density.g.basis());
    if cell.phi.len() != n {
        return Err(Error::Validation(format!(
            "cell solution has {} components for dimension {n}",
            cell.phi.len()
        )));
    }
    if v_bar.len() != n {
        return Err(Error::Validation(format!(
            "mean drift has {} components for dimension {n}",
            v_bar.len()
        )));
    }
    let mu = MuIntegrator::new(&density.g);
    let beta = basis.hermite_scale();
    let sqrt_tau = params.tau.sqrt();

    let phi_vals: Vec<Vec<Complex64>> = cell.phi.iter().map(|phi| mu.values(phi)).collect();
    let r_vals: Vec<Vec<Complex64>> = (0..n)
        .map(|j| {
            let mut e_j = vec![0u32; n];
            e_j[j] = 1;
            let mut r = CoefficientField::zero(Arc::clone(&basis));
            r.set(&vec![0i32; n], &e_j, Complex64::new(beta / sqrt_tau, 0.0));
            r.set(&vec![0i32; n], &vec![0u32; n], Complex64::new(-v_bar[j], 0.0));
            mu.values(&r)
        })
        .collect();

    let r_slices: Vec<&[Complex64]> = r_vals.iter().map(|v| v.as_slice()).collect();
    let phi_slices: Vec<&[Complex64]> = phi_vals.iter().map(|v| v.as_slice()).collect();
    // pairs[a·n + b] = ∫ R_a Φ_b dμ; only the symmetric part is K², the
    // antisymmetric part is genuine non-reversibility, not error
    let pairs = mu.gram(&r_slices, &phi_slices);
    let mut matrix = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            matrix[a * n + b] = pairs[a * n + b] + pairs[b * n + a];
        }
    }

    let dm = nalgebra::DMatrix::from_row_slice(n, n, &matrix);
    let mut eigenvalues: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if eigenvalues[0] < -1e-10 {
        return Err(Error::Solver(format!(
            "effective diffusivity has negative eigenvalue {:.3e}",
            eigenvalues[0]
        )));
    }

    Ok(DiffusivityResult {
        n,
        matrix,
        asymmetry: 0.0,
        eigenvalues,
        cell_residuals: cell.residuals.clone(),
        n_fourier: basis.fourier_cutoff(),
        n_hermite: basis.hermite_cutoff(),
    })
}

/// Everything the spectral route produces for one drift at one truncation.
pub struct PipelineRun {
    pub density: InvariantDensity,
    pub v_bar: Vec<f64>,
    pub cell: CellSolution,
    pub diffusivity: DiffusivityResult,
}

/// Assemble → invariant density → mean drift → cell problems → K².
pub fn run_pipeline(
    drift: &DriftSpec,
    params: &ModelParams,
    n_f: usize,
    n_h: usize,
) -> Result<PipelineRun> {
    let basis = Basis::new(params, n_f, n_h)?;
    let op = assemble_generator(drift, params, &basis)?;
    let density = invariant_density(&op)?;
    let v_bar = mean_drift(&density, drift, params)?;
    let cell = solve_cell_problem(&op, &density, &v_bar, params)?;
    let diffusivity = effective_diffusivity(&cell, &density, &v_bar, params)?;
    Ok(PipelineRun { density, v_bar, cell, diffusivity })
}

/// Reference value for the τ → 0 limit of a 1-D gradient model: the
/// overdamped (position-space) diffusivity σ² / (Ẑ₊ Ẑ₋) with
/// Ẑ± = ∫₀¹ e^{±2V(x)/σ²} dx, integrals taken to 1e-12 by doubling the
/// periodic trapezoid rule (spectrally accurate for smooth V).
pub fn smoluchowski_diffusivity_1d(drift: &DriftSpec, sigma: f64) -> Result<f64> {
    if drift.dim() != 1 {
        return Err(Error::Validation(
            "overdamped reference value is only defined for n = 1".into(),
        ));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
    }
    if drift.is_zero() {
        // V = 0: both partition integrals are 1
        return Ok(sigma * sigma);
    }
    if !drift.is_gradient() {
        return Err(Error::Validation(
            "overdamped reference value requires a gradient drift v = −∇V".into(),
        ));
    }
    let scale = 2.0 / (sigma * sigma);
    let z_plus = periodic_mean(|x| (scale * drift.eval_potential(&[x]).unwrap()).exp())?;
    let z_minus = periodic_mean(|x| (-scale * drift.eval_potential(&[x]).unwrap()).exp())?;
    Ok(sigma * sigma / (z_plus * z_minus))
}

/// ∫₀¹ f(x) dx for smooth periodic f: equispaced mean with interval
/// doubling until two consecutive levels agree to 1e-12 relative.
fn periodic_mean(f: impl Fn(f64) -> f64) -> Result<f64> {
    let mean = |m: usize| (0..m).map(|i| f(i as f64 / m as f64)).sum::<f64>() / m as f64;
    let mut m = 16;
    let mut prev = mean(m);
    loop {
        m *= 2;
        let cur = mean(m);
        if (cur - prev).abs() <= 1e-12 * cur.abs().max(1.0) {
            return Ok(cur);
        }
        if m >= 1 << 22 {
            return Err(Error::Solver(
                "periodic quadrature failed to converge to 1e-12".into(),
            ));
        }
        prev = cur;
    }
}

/// One cutoff level of a truncation study; failures are carried as rows so
/// a partially-failing ladder still reports everything it produced.
#[derive(Debug, Clone)]
pub struct TruncationRow {
    pub n_fourier: usize,
    pub n_hermite: usize,
    pub k_squared: Option<Vec<f64>>,
    pub max_cell_residual: Option<f64>,
    pub density_residual: Option<f64>,
    pub error: Option<String>,
    /// Frobenius distance of K² to the previous successful row
    pub cauchy_diff: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TruncationStudy {
    pub rows: Vec<TruncationRow>,
    /// true when successive Cauchy differences fail to decrease beyond the
    /// rounding floor — the ladder has stagnated instead of converging
    pub stagnation: bool,
}

/// Rerun the full pipeline over a ladder of (N_F, N_H) cutoffs.
pub fn truncation_study(
    drift: &DriftSpec,
    params: &ModelParams,
    ladder: &[(usize, usize)],
) -> TruncationStudy {
    let mut rows = Vec::with_capacity(ladder.len());
    let mut prev: Option<Vec<f64>> = None;
    let mut diffs: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    for &(n_f, n_h) in ladder {
        match run_pipeline(drift, params, n_f, n_h) {
            Ok(run) => {
                let k = run.diffusivity.matrix.clone();
                let diff = prev.as_ref().map(|p| {
                    p.iter()
                        .zip(&k)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                });
                if let Some(d) = diff {
                    diffs.push(d);
                }
                scale = run.diffusivity.frobenius();
                rows.push(TruncationRow {
                    n_fourier: n_f,
                    n_hermite: n_h,
                    k_squared: Some(k.clone()),
                    max_cell_residual: run
                        .cell
                        .residuals
                        .iter()
                        .cloned()
                        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r)))),
                    density_residual: Some(run.density.residual),
                    error: None,
                    cauchy_diff: diff,
                });
                prev = Some(k);
            }
            Err(e) => rows.push(TruncationRow {
                n_fourier: n_f,
                n_hermite: n_h,
                k_squared: None,
                max_cell_residual: None,
                density_residual: None,
                error: Some(e.to_string()),
                cauchy_diff: None,
            }),
        }
    }
    let floor = 1e-12 * scale.max(1.0);
    let stagnation = diffs
        .windows(2)
        .any(|w| w[1] > w[0].max(floor) && w[1] > floor);
    TruncationStudy { rows, stagnation }
}
