//! Linear-algebra layer of the spectral pipeline: invariant density (adjoint
//! kernel), kernel-gap diagnostic, and the deflated cell-problem solves.
//!
//! Two factorizations of the assembled generator are used:
//!
//! * `A + ηI` with a tiny real shift η — the truncated `A` is exactly
//!   singular (the constant's column is zero), so one or two steps of
//!   shifted inverse iteration on the adjoint recover the invariant density
//!   to rounding, and a two-column inverse subspace iteration estimates the
//!   *second* smallest singular value (the kernel gap that certifies the
//!   kernel is one-dimensional at this truncation).
//! * `S = −A` with the constant's row replaced by the identity row — pins
//!   `Φ(constant) = 0` so the cell problems become uniquely solvable; the
//!   additive constant is restored afterwards from the μ-centering
//!   condition.
//!
//! For n=1 the pinned system is solved by sparse LU directly; for n≥2 a
//! restarted GMRES with the Ornstein–Uhlenbeck diagonal as (right)
//! preconditioner is tried first and the LU is kept as a fallback. Either
//! way the *unpinned* residual `‖AΦ + b‖/‖b‖` is checked against 1e-9, so
//! the solver choice cannot silently change results.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DriftSpec, ModelParams};
use crate::spectral::basis::CoefficientField;
use crate::spectral::operator::SpectralOperator;
use crate::spectral::quadrature::grid_eval;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Invariant density in the weighted representation: `ρ(x,y) = g(x,y)·φ_β(y)`
/// with `φ_β` the `N(0, β²I)` density and `∫ρ = 1` (equivalently, the
/// constant coefficient of `g` is 1).
#[derive(Debug, Clone)]
pub struct InvariantDensity {
    pub g: CoefficientField,
    /// `‖A^H w‖ / ‖w‖` of the converged kernel vector.
    pub residual: f64,
    /// Estimate of the second-smallest singular value of the generator —
    /// the margin by which the kernel is one-dimensional at this truncation.
    pub kernel_gap: f64,
    /// Minimum of `g` on the positivity grid (≥ −1e-10 or the solve fails).
    pub grid_min: f64,
}

impl InvariantDensity {
    /// Pointwise density value `ρ(x, y)`.
    pub fn rho(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let beta = self.g.basis().hermite_scale();
        let mut gauss = 1.0;
        for &yj in y {
            gauss *= (-yj * yj / (2.0 * beta * beta)).exp() / ((2.0 * PI).sqrt() * beta);
        }
        Ok(self.g.eval_real(x, y)? * gauss)
    }
}

fn solver_err<E: std::fmt::Debug>(what: &str) -> impl FnOnce(E) -> Error + '_ {
    move |e| Error::Solver(format!("{what}: {e:?}"))
}

/// `A + ηI` as a faer matrix (η added to every diagonal slot, present or not).
fn shifted_matrix(op: &SpectralOperator, eta: f64) -> Result<SparseColMat<usize, Complex64>> {
    let size = op.size();
    let mut trips: Vec<Triplet<usize, usize, Complex64>> = Vec::with_capacity(op.nnz() + size);
    let mut diag_seen = vec![false; size];
    for (r, c, v) in op.entries() {
        if r == c {
            diag_seen[r] = true;
            trips.push(Triplet::new(r, c, v + Complex64::new(eta, 0.0)));
        } else {
            trips.push(Triplet::new(r, c, v));
        }
    }
    for (r, seen) in diag_seen.iter().enumerate() {
        if !seen {
            trips.push(Triplet::new(r, r, Complex64::new(eta, 0.0)));
        }
    }
    SparseColMat::try_new_from_triplets(size, size, &trips)
        .map_err(solver_err("building shifted generator matrix"))
}

/// `S = −A` with the constant's row replaced by the identity row.
fn pinned_matrix(op: &SpectralOperator) -> Result<SparseColMat<usize, Complex64>> {
    let size = op.size();
    let p = op.constant_rank();
    let mut trips: Vec<Triplet<usize, usize, Complex64>> = Vec::with_capacity(op.nnz() + 1);
    for (r, c, v) in op.entries() {
        if r != p {
            trips.push(Triplet::new(r, c, -v));
        }
    }
    trips.push(Triplet::new(p, p, Complex64::new(1.0, 0.0)));
    SparseColMat::try_new_from_triplets(size, size, &trips)
        .map_err(solver_err("building pinned cell-problem matrix"))
}

fn to_faer_col(v: &[Complex64]) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn from_faer_col(m: &faer::Mat<Complex64>, out: &mut [Complex64]) {
    for i in 0..out.len() {
        out[i] = m[(i, 0)];
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Two-pass modified Gram–Schmidt over a small block of long columns.
fn orthonormalize(cols: &mut [Vec<Complex64>]) -> Result<()> {
    for i in 0..cols.len() {
        for _pass in 0..2 {
            for j in 0..i {
                let proj: Complex64 = cols[i]
                    .iter()
                    .zip(&cols[j])
                    .map(|(a, b)| a * b.conj())
                    .sum();
                let (head, tail) = cols.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a -= proj * b;
                }
            }
        }
        let n = norm2(&cols[i]);
        if !(n.is_finite() && n > 1e-300) {
            return Err(Error::Solver(
                "kernel-gap block iteration collapsed; cannot certify the kernel dimension".into(),
            ));
        }
        for z in &mut cols[i] {
            *z /= n;
        }
    }
    Ok(())
}

/// Solve for the invariant density of the truncated generator.
pub fn invariant_density(op: &SpectralOperator) -> Result<InvariantDensity> {
    let size = op.size();
    let p = op.constant_rank();
    let scale = op.scale().max(1.0);
    let eta = 1e-10 * scale;

    let shifted = shifted_matrix(op, eta)?;
    let lu = shifted.sp_lu().map_err(solver_err("LU of shifted generator"))?;

    // ---- inverse iteration on the adjoint: w ← (A+ηI)^{-H} w -------------
    // The truncated A is exactly singular, so this converges essentially in
    // one step; keep iterating only while the residual still improves.
    let mut w = vec![ZERO; size];
    w[p] = Complex64::new(1.0, 0.0);
    let mut best = f64::INFINITY;
    let mut best_w = w.clone();
    let mut scratch = vec![ZERO; size];
    let mut prev = f64::INFINITY;
    for it in 0..10 {
        let mut rhs = to_faer_col(&w);
        lu.solve_adjoint_in_place(rhs.as_mut());
        from_faer_col(&rhs, &mut w);
        let nrm = norm2(&w);
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Solver(
                "inverse iteration for the invariant density produced a non-finite vector".into(),
            ));
        }
        for z in &mut w {
            *z /= nrm;
        }
        op.apply_adjoint(&w, &mut scratch);
        let res = norm2(&scratch);
        if res < best {
            best = res;
            best_w.copy_from_slice(&w);
        }
        // converged to the rounding floor, or no longer improving
        if res < 1e-13 * scale || (it >= 2 && res > 0.5 * prev) {
            break;
        }
        prev = res;
    }
    if best > 1e-10 {
        return Err(Error::Solver(format!(
            "inverse iteration for the invariant density stagnated at residual {best:.3e} \
             (tolerance 1e-10); the truncation is likely too small"
        )));
    }
    let w = best_w;

    // ---- kernel gap: block inverse iteration + Rayleigh–Ritz --------------
    // A 4-column block of (BB^H)^{-1}-iterations converges onto the span of
    // the smallest left singular directions of A; Rayleigh–Ritz on AA^H over
    // that span (via the Gram matrix of A^H V) then reads off the singular
    // values. The smallest Ritz value is the kernel (≈0); the next one is
    // the gap. Ritz values only over-estimate, and near-degeneracy — the
    // case that must be caught — is where the iteration converges fastest.
    let kernel_gap = {
        let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE_5EED);
        let k_block = 4.min(size);
        let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(k_block);
        cols.push(w.clone());
        for _ in 1..k_block {
            cols.push(
                (0..size)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect(),
            );
        }
        orthonormalize(&mut cols)?;
        for _ in 0..10 {
            for v in cols.iter_mut() {
                let mut m = to_faer_col(v);
                lu.solve_in_place(m.as_mut());
                lu.solve_adjoint_in_place(m.as_mut());
                from_faer_col(&m, v);
            }
            orthonormalize(&mut cols)?;
        }
        let mut w_cols: Vec<Vec<Complex64>> = Vec::with_capacity(k_block);
        for v in &cols {
            op.apply_adjoint(v, &mut scratch);
            w_cols.push(scratch.clone());
        }
        let mut gram = nalgebra::DMatrix::<Complex64>::zeros(k_block, k_block);
        for i in 0..k_block {
            for j in 0..k_block {
                gram[(i, j)] = w_cols[i]
                    .iter()
                    .zip(&w_cols[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
            }
        }
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        lambdas[1].max(0.0).sqrt()
    };
    if kernel_gap < 1e-8 {
        return Err(Error::Solver(format!(
            "degenerate truncation: second singular value {kernel_gap:.3e} < 1e-8, so the \
             numerical kernel is not one-dimensional; increase the cutoffs"
        )));
    }

    // ---- map the adjoint kernel to the density representation ------------
    // ⟨Lf⟩_ρ = 0 for all f forces ĝ[k,α] = conj(w[−k,α]).
    let basis = op.basis().clone();
    let mut g = CoefficientField::zero(basis.clone());
    for k_rank in 0..basis.n_fourier() {
        let flip = basis.fourier_flip(k_rank);
        for a_rank in 0..basis.n_hermite() {
            g.coeffs_mut()[basis.flat(k_rank, a_rank)] = w[basis.flat(flip, a_rank)].conj();
        }
    }

    // normalize ∫ρ = 1 ⇔ constant coefficient = 1
    let g_p = g.coeffs()[p];
    if g_p.norm() < 1e-8 * g.norm() {
        return Err(Error::Solver(
            "kernel vector carries no mass on the constant mode; truncation degenerate".into(),
        ));
    }
    g.scale(g_p.inv());

    // realness: must hold structurally; enforce it exactly afterwards so
    // downstream contractions see a bitwise-real density
    let defect = g.conj_symmetry_error();
    if defect > 1e-8 * (1.0 + g.sup_coeff()) {
        return Err(Error::Solver(format!(
            "invariant density violates conjugate symmetry by {defect:.3e}"
        )));
    }
    let mirror = g.flip_conj();
    g.add_scaled(&mirror, Complex64::new(1.0, 0.0));
    g.scale(Complex64::new(0.5, 0.0));

    // ---- flush sub-floor coefficients to exact zeros ----------------------
    // The inverse iteration resolves g only down to ~1e-13·scale, so entries
    // below 1e-14·sup|g| are rounding noise, not signal. They must be exact
    // zeros: the Hermite triple-product weights used when contracting against
    // the density grow combinatorially with degree, and at high cutoffs they
    // amplify degree-40+ noise into O(1) errors in the diffusivity.
    let floor = 1e-14 * g.sup_coeff();
    for z in g.coeffs_mut() {
        if z.norm() < floor {
            *z = ZERO;
        }
    }

    // ---- positivity on a sampling grid ------------------------------------
    let n = basis.dim();
    let mx = (4 * basis.fourier_cutoff()).max(32) + 1;
    let xs: Vec<Vec<f64>> = vec![(0..mx).map(|i| i as f64 / mx as f64).collect(); n];
    let zs: Vec<Vec<f64>> = vec![(0..17).map(|i| -4.0 + 0.5 * i as f64).collect(); n];
    let vals = grid_eval(&g, &xs, &zs);
    let mut grid_min = f64::INFINITY;
    for v in &vals {
        grid_min = grid_min.min(v.re);
    }
    if grid_min < -1e-10 {
        return Err(Error::Solver(format!(
            "invariant density negative on the sampling grid (min {grid_min:.3e}); \
             the truncation is too small for this drift"
        )));
    }

    Ok(InvariantDensity { g, residual: best, kernel_gap, grid_min })
}

/// Mean drift `v̄ = ∫ v dμ`, with the consistency check `∫y dμ = √τ·v̄` that
/// holds *exactly* at the truncated level (so a violation signals an
/// assembly bug, not truncation error).
pub fn mean_drift(
    density: &InvariantDensity,
    drift: &DriftSpec,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let g = &density.g;
    let basis = g.basis();
    let n = basis.dim();
    let zero_alpha = vec![0u32; n];
    let a0 = basis.hermite_rank(&zero_alpha).expect("zero multi-index present");

    let mut v_bar = vec![0.0f64; n];
    for (m, comps) in drift.fourier_coeffs() {
        let neg: Vec<i32> = m.iter().map(|&c| -c).collect();
        let Some(kr) = basis.fourier_rank(&neg) else {
            // drift mode outside the box is prevented at assembly time
            return Err(Error::Solver(format!(
                "drift mode {m:?} outside the Fourier box during mean-drift contraction"
            )));
        };
        let gq = g.coeffs()[basis.flat(kr, a0)];
        for j in 0..n {
            let term = comps[j] * gq;
            v_bar[j] += term.re;
        }
    }

    // ∫ y_j dμ = β · ĝ[0, e_j]
    let k0 = basis.fourier_rank(&vec![0i32; n]).expect("origin inside box");
    let beta = basis.hermite_scale();
    let sqrt_tau = params.tau.sqrt();
    for j in 0..n {
        let mut e_j = vec![0u32; n];
        e_j[j] = 1;
        let ar = basis.hermite_rank(&e_j).expect("degree-1 index present");
        let y_mean = g.coeffs()[basis.flat(k0, ar)] * beta;
        if y_mean.im.abs() > 1e-10 {
            return Err(Error::Solver(format!(
                "∫y_{j} dμ has imaginary part {:.3e} — operator-assembly bug signal",
                y_mean.im
            )));
        }
        let gap = (y_mean.re - sqrt_tau * v_bar[j]).abs();
        if gap > 1e-10 {
            return Err(Error::Solver(format!(
                "velocity-centering identity violated in component {j}: \
                 ∫y dμ = {:.16e} but √τ·v̄ = {:.16e} — operator-assembly bug signal",
                y_mean.re,
                sqrt_tau * v_bar[j]
            )));
        }
    }
    Ok(v_bar)
}

/// Solution of the cell problems, one component per space dimension.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub phi: Vec<CoefficientField>,
    /// Unpinned relative residuals `‖AΦ_j + b_j‖ / ‖b_j‖`.
    pub residuals: Vec<f64>,
    /// Whether the preconditioned iterative path produced the solutions
    /// (false = direct LU, including the fallback).
    pub used_iterative: bool,
}

/// Solve `−L Φ_j = (y_j − √τ v̄_j)/√τ` for all j, centered so `∫Φ_j dμ = 0`.
pub fn solve_cell_problem(
    op: &SpectralOperator,
    density: &InvariantDensity,
    v_bar: &[f64],
    params: &ModelParams,
) -> Result<CellSolution> {
    let basis = op.basis().clone();
    let n = basis.dim();
    assert_eq!(v_bar.len(), n);
    let size = op.size();
    let p = op.constant_rank();
    let beta = basis.hermite_scale();
    let sqrt_tau = params.tau.sqrt();
    let k0 = basis.fourier_rank(&vec![0i32; n]).expect("origin inside box");

    // right-hand sides: b_j = y_j/√τ − v̄_j
    let mut rhs_full = Vec::with_capacity(n);
    for j in 0..n {
        let mut e_j = vec![0u32; n];
        e_j[j] = 1;
        let ar = basis.hermite_rank(&e_j).expect("degree-1 index present");
        let mut b = vec![ZERO; size];
        b[basis.flat(k0, ar)] = Complex64::new(beta / sqrt_tau, 0.0);
        b[p] = Complex64::new(-v_bar[j], 0.0);
        rhs_full.push(b);
    }

    let mut lu = None;
    let ensure_lu = |lu: &mut Option<_>| -> Result<()> {
        if lu.is_none() {
            let s = pinned_matrix(op)?;
            *lu = Some(s.sp_lu().map_err(solver_err("LU of pinned cell matrix"))?);
        }
        Ok(())
    };

    // OU diagonal (floored) as the right preconditioner for the iterative path
    let precond: Vec<f64> = op
        .ou_diag()
        .iter()
        .map(|&d| if d > 0.0 { d } else { 1.0 / params.tau })
        .collect();
    let apply_pinned = |v: &[Complex64], out: &mut [Complex64]| {
        op.apply(v, out);
        for z in out.iter_mut() {
            *z = -*z;
        }
        out[p] = v[p];
    };

    let mut phi = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    let mut used_iterative = n >= 2;
    for (j, b_full) in rhs_full.iter().enumerate() {
        let mut b_pinned = b_full.clone();
        b_pinned[p] = ZERO;

        let mut x = vec![ZERO; size];
        let mut solved = false;
        if n >= 2 {
            solved = gmres(&apply_pinned, &precond, &b_pinned, &mut x, 1e-12, 60, 6);
            if !solved {
                used_iterative = false;
            }
        }
        if !solved {
            ensure_lu(&mut lu)?;
            let mut m = to_faer_col(&b_pinned);
            lu.as_ref().unwrap().solve_in_place(m.as_mut());
            from_faer_col(&m, &mut x);
        }
        x[p] = ZERO; // the pinned row enforces this up to rounding; make it exact

        // unpinned residual against the defining equation AΦ = −b
        let mut ax = vec![ZERO; size];
        op.apply(&x, &mut ax);
        let mut num = 0.0f64;
        for i in 0..size {
            num += (ax[i] + b_full[i]).norm_sqr();
        }
        let res = num.sqrt() / norm2(b_full);
        if res > 1e-9 {
            return Err(Error::Solver(format!(
                "cell-problem residual {res:.3e} for component {j} exceeds 1e-9; \
                 truncation too small — retry with N_F ≥ {}, N_H ≥ {}",
                2 * basis.fourier_cutoff(),
                basis.hermite_cutoff() + 10
            )));
        }
        residuals.push(res);

        let mut field = CoefficientField::from_coeffs(basis.clone(), x);
        // restore the additive constant: ∫Φ dμ = 0
        let mean = field.contract_density(&density.g);
        field.coeffs_mut()[p] = -mean;
        // realness (RHS real, operator real ⇒ Φ real); enforce exactly
        let defect = field.conj_symmetry_error();
        if defect > 1e-8 * (1.0 + field.sup_coeff()) {
            return Err(Error::Solver(format!(
                "cell solution {j} violates conjugate symmetry by {defect:.3e}"
            )));
        }
        let mirror = field.flip_conj();
        field.add_scaled(&mirror, Complex64::new(1.0, 0.0));
        field.scale(Complex64::new(0.5, 0.0));
        phi.push(field);
    }

    Ok(CellSolution { phi, residuals, used_iterative })
}

/// Restarted GMRES with a positive diagonal right preconditioner.
/// Returns true when `‖b − S x‖ ≤ rtol · ‖b‖` was reached.
fn gmres(
    apply: &dyn Fn(&[Complex64], &mut [Complex64]),
    precond: &[f64],
    b: &[Complex64],
    x: &mut [Complex64],
    rtol: f64,
    restart: usize,
    max_cycles: usize,
) -> bool {
    let size = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(ZERO);
        return true;
    }
    let tol = rtol * bnorm;
    let mut r = vec![ZERO; size];
    let mut tmp = vec![ZERO; size];

    for _cycle in 0..max_cycles {
        // r = b − S x
        apply(x, &mut r);
        for i in 0..size {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        if beta <= tol {
            return true;
        }

        let m = restart;
        let mut v: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|z| z / beta).collect());
        let mut h = vec![vec![ZERO; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![ZERO; m];
        let mut gvec = vec![ZERO; m + 1];
        gvec[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        let mut converged = false;

        for k in 0..m {
            // w = S (D^{-1} v_k)
            for i in 0..size {
                tmp[i] = v[k][i] / precond[i];
            }
            let mut w = vec![ZERO; size];
            apply(&tmp, &mut w);
            // modified Gram–Schmidt with one reorthogonalization pass
            for pass in 0..2 {
                for (i, vi) in v.iter().enumerate().take(k + 1) {
                    let hik: Complex64 = w.iter().zip(vi).map(|(a, c)| a * c.conj()).sum();
                    if pass == 0 {
                        h[i][k] = hik;
                    } else {
                        h[i][k] += hik;
                    }
                    for (a, c) in w.iter_mut().zip(vi) {
                        *a -= hik * c;
                    }
                }
            }
            let wnorm = norm2(&w);
            h[k + 1][k] = Complex64::new(wnorm, 0.0);

            // apply accumulated Givens rotations to the new column
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            // new rotation zeroing h[k+1][k]
            let a = h[k][k];
            let bb = h[k + 1][k];
            let denom = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            if a.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = Complex64::new(1.0, 0.0);
            } else {
                cs[k] = a.norm() / denom;
                sn[k] = (a / a.norm()) * bb.conj() / denom;
            }
            h[k][k] = cs[k] * a + sn[k] * bb;
            h[k + 1][k] = ZERO;
            let t = cs[k] * gvec[k];
            gvec[k + 1] = -sn[k].conj() * gvec[k];
            gvec[k] = t;
            k_used = k + 1;

            if gvec[k + 1].norm() <= tol {
                converged = true;
            } else if wnorm > 0.0 {
                v.push(w.iter().map(|z| z / wnorm).collect());
            }
            if converged || wnorm == 0.0 {
                break;
            }
        }

        // back-substitution over the k_used×k_used triangle
        if k_used > 0 {
            let mut y = vec![ZERO; k_used];
            for i in (0..k_used).rev() {
                let mut acc = gvec[i];
                for j2 in i + 1..k_used {
                    acc -= h[i][j2] * y[j2];
                }
                y[i] = acc / h[i][i];
            }
            // x += D^{-1} (V y)
            for i in 0..size {
                let mut acc = ZERO;
                for (j2, yj) in y.iter().enumerate() {
                    acc += v[j2][i] * yj;
                }
                x[i] += acc / precond[i];
            }
        }

        apply(x, &mut tmp);
        let mut true_res = 0.0f64;
        for i in 0..size {
            true_res += (b[i] - tmp[i]).norm_sqr();
        }
        if true_res.sqrt() <= tol {
            return true;
        }
    }
    false
}

/// All singular values of the assembled operator by dense SVD — a brute
/// oracle for validating the kernel-gap estimate at small cutoffs.
pub fn dense_singular_values(op: &SpectralOperator) -> Vec<f64> {
    let size = op.size();
    assert!(size <= 4096, "dense SVD oracle is for small truncations only");
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(size, size);
    for (r, c, v) in op.entries() {
        m[(r, c)] = v;
    }
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset_cosine_gradient, preset_two_mode_nongradient};
    use crate::spectral::basis::Basis;
    use crate::spectral::operator::assemble_generator;

    fn pipeline(
        drift: &DriftSpec,
        tau: f64,
        sigma: f64,
        n_f: usize,
        n_h: usize,
    ) -> (ModelParams, SpectralOperator, InvariantDensity) {
        let params = ModelParams::new(tau, sigma, drift.dim()).unwrap();
        let basis = Basis::new(&params, n_f, n_h).unwrap();
        let op = assemble_generator(drift, &params, &basis).unwrap();
        let density = invariant_density(&op).unwrap();
        (params, op, density)
    }

    #[test]
    fn zero_drift_density_is_exact() {
        let drift = DriftSpec::zero(1);
        let (_, op, density) = pipeline(&drift, 0.6, 1.4, 4, 8);
        let p = op.constant_rank();
        for (i, c) in density.g.coeffs().iter().enumerate() {
            let want = if i == p { 1.0 } else { 0.0 };
            assert!(
                (c - Complex64::new(want, 0.0)).norm() < 1e-12,
                "coeff {i}: {c}"
            );
        }
        assert!(density.residual < 1e-12);
        assert!(density.kernel_gap > 0.1);
        assert!(density.grid_min > 0.9);
    }

    #[test]
    fn gibbs_density_for_gradient_drift() {
        // ρ ∝ exp(−(2V + ‖y‖²)/σ²) ⇒ g(x) = e^{−2V/σ²} / ∫e^{−2V/σ²}.
        let drift = preset_cosine_gradient();
        let sigma = 1.1f64;
        let (_, _, density) = pipeline(&drift, 0.5, sigma, 8, 10);
        // periodic trapezoid is spectrally accurate for the normalizer
        let m = 512;
        let z: f64 = (0..m)
            .map(|i| {
                let x = i as f64 / m as f64;
                let v_pot = 0.5 * (2.0 * PI * x).cos();
                (-2.0 * v_pot / (sigma * sigma)).exp()
            })
            .sum::<f64>()
            / m as f64;
        let mut worst = 0.0f64;
        for i in 0..64 {
            let x = i as f64 / 64.0;
            let v_pot = 0.5 * (2.0 * PI * x).cos();
            let want = (-2.0 * v_pot / (sigma * sigma)).exp() / z;
            for &y in &[-1.0, 0.0, 1.3] {
                let got = density.g.eval_real(&[x], &[y]).unwrap();
                worst = worst.max(((got - want) / want).abs());
            }
        }
        assert!(worst < 1e-6, "Gibbs mismatch: rel L∞ = {worst:.3e}");
    }

    #[test]
    fn mean_drift_identities() {
        // gradient drift: detailed balance ⇒ v̄ = 0
        let drift = preset_cosine_gradient();
        let (params, _, density) = pipeline(&drift, 0.5, 1.1, 8, 10);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        assert!(vb[0].abs() < 1e-10, "gradient drift v̄ = {}", vb[0]);

        // nongradient: v̄ ≠ 0 and the ∫y = √τ v̄ identity holds internally
        let drift = preset_two_mode_nongradient();
        let (params, _, density) = pipeline(&drift, 0.8, 1.2, 8, 16);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        assert!(vb[0].abs() > 1e-3, "two-mode drift should have nonzero v̄");

        // constant drift c: μ is the free measure shifted — v̄ = c exactly
        let mut coeffs = std::collections::BTreeMap::new();
        coeffs.insert(vec![0], vec![Complex64::new(0.37, 0.0)]);
        let drift = DriftSpec::new(1, coeffs).unwrap();
        let (params, _, density) = pipeline(&drift, 0.9, 1.0, 4, 8);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        assert!((vb[0] - 0.37).abs() < 1e-12, "constant drift v̄ = {}", vb[0]);
    }

    #[test]
    fn zero_drift_cell_solution_is_sqrt_tau_y() {
        let drift = DriftSpec::zero(1);
        let tau = 0.85;
        let (params, op, density) = pipeline(&drift, tau, 1.3, 4, 8);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        let sol = solve_cell_problem(&op, &density, &vb, &params).unwrap();
        let basis = op.basis();
        let expect = tau.sqrt() * basis.hermite_scale();
        for (i, c) in sol.phi[0].coeffs().iter().enumerate() {
            let want = if i == basis.flat(basis.fourier_rank(&[0]).unwrap(), 1) {
                expect
            } else {
                0.0
            };
            assert!(
                (c - Complex64::new(want, 0.0)).norm() < 1e-12,
                "Φ coeff {i}: {c}"
            );
        }
        assert!(sol.residuals[0] < 1e-12);
    }

    #[test]
    fn constant_drift_cell_solution_matches_closed_form() {
        // v ≡ c: Φ = √τ(y − √τ c) solves −LΦ = (y − √τc)/√τ because
        // L y = v/√τ − y/τ. Centered: ∫y dμ = √τ c ⇒ ∫Φ dμ = 0 already.
        let c0 = 0.42;
        let mut coeffs = std::collections::BTreeMap::new();
        coeffs.insert(vec![0], vec![Complex64::new(c0, 0.0)]);
        let drift = DriftSpec::new(1, coeffs).unwrap();
        let tau = 0.7;
        let (params, op, density) = pipeline(&drift, tau, 1.1, 4, 8);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        assert!((vb[0] - c0).abs() < 1e-12);
        let sol = solve_cell_problem(&op, &density, &vb, &params).unwrap();
        let basis = op.basis();
        let k0 = basis.fourier_rank(&[0]).unwrap();
        // Φ = √τ·y − τ·c, i.e. √τ·β at Hermite degree 1 and −τc constant
        for (i, coeff) in sol.phi[0].coeffs().iter().enumerate() {
            let want = if i == basis.flat(k0, 1) {
                tau.sqrt() * basis.hermite_scale()
            } else if i == basis.flat(k0, 0) {
                -tau * c0
            } else {
                0.0
            };
            assert!(
                (coeff - Complex64::new(want, 0.0)).norm() < 1e-12,
                "Φ coeff {i}: {coeff} want {want}"
            );
        }
    }

    #[test]
    #[ignore = "diagnostic probe"]
    fn probe_positivity_ladder() {
        let drift = preset_two_mode_nongradient();
        for nh in [12usize, 16, 20, 24, 30] {
            let params = ModelParams::new(0.8, 1.2, 1).unwrap();
            let basis = Basis::new(&params, 8, nh).unwrap();
            let op = assemble_generator(&drift, &params, &basis).unwrap();
            match invariant_density(&op) {
                Ok(d) => println!("N_H={nh}: grid_min={:.3e} gap={:.3}", d.grid_min, d.kernel_gap),
                Err(e) => println!("N_H={nh}: {e}"),
            }
        }
    }

    #[test]
    fn kernel_gap_matches_dense_svd() {
        for drift in [preset_cosine_gradient(), preset_two_mode_nongradient()] {
            let params = ModelParams::new(0.9, 1.2, 1).unwrap();
            let basis = Basis::new(&params, 5, 16).unwrap();
            let op = assemble_generator(&drift, &params, &basis).unwrap();
            let density = invariant_density(&op).unwrap();
            let sv = dense_singular_values(&op);
            assert!(sv[0] < 1e-10, "smallest singular value {}", sv[0]);
            let rel = (density.kernel_gap - sv[1]).abs() / sv[1];
            assert!(
                rel < 0.05,
                "gap estimate {} vs dense {} (rel {rel})",
                density.kernel_gap,
                sv[1]
            );
        }
    }

    #[test]
    fn cell_solutions_are_centered_and_real() {
        let drift = preset_two_mode_nongradient();
        let (params, op, density) = pipeline(&drift, 0.8, 1.2, 8, 16);
        let vb = mean_drift(&density, &drift, &params).unwrap();
        let sol = solve_cell_problem(&op, &density, &vb, &params).unwrap();
        let phi = &sol.phi[0];
        assert!(phi.contract_density(&density.g).norm() < 1e-12 * (1.0 + phi.norm()));
        assert_eq!(phi.conj_symmetry_error(), 0.0); // exact after symmetrization
        assert!(sol.residuals[0] < 1e-9);
    }

    #[test]
    fn gmres_solves_the_pinned_system_in_2d() {
        // n=2 exercises the preconditioned iterative path; cross-check the
        // solution against the direct LU on the same pinned matrix.
        let mut coeffs = std::collections::BTreeMap::new();
        coeffs.insert(vec![1, 0], vec![Complex64::new(0.0, -0.3), ZERO]);
        coeffs.insert(vec![-1, 0], vec![Complex64::new(0.0, 0.3), ZERO]);
        coeffs.insert(vec![0, 1], vec![ZERO, Complex64::new(0.15, 0.1)]);
        coeffs.insert(vec![0, -1], vec![ZERO, Complex64::new(0.15, -0.1)]);
        let drift = DriftSpec::new(2, coeffs).unwrap();
        let params = ModelParams::new(0.9, 1.2, 2).unwrap();
        let basis = Basis::new(&params, 3, 6).unwrap();
        let op = assemble_generator(&drift, &params, &basis).unwrap();
        let density = invariant_density(&op).unwrap();
        let vb = mean_drift(&density, &drift, &params).unwrap();
        let sol = solve_cell_problem(&op, &density, &vb, &params).unwrap();
        assert!(sol.used_iterative, "n=2 should take the GMRES path");
        assert!(sol.residuals.iter().all(|&r| r < 1e-9));

        // direct solve of the same pinned system for one component
        let s = pinned_matrix(&op).unwrap();
        let lu = s.sp_lu().unwrap();
        let p = op.constant_rank();
        let k0 = basis.fourier_rank(&[0, 0]).unwrap();
        let a1 = basis.hermite_rank(&[1, 0]).unwrap();
        let mut b = vec![ZERO; op.size()];
        b[basis.flat(k0, a1)] = Complex64::new(basis.hermite_scale() / params.tau.sqrt(), 0.0);
        b[p] = ZERO;
        let mut m = to_faer_col(&b);
        lu.solve_in_place(m.as_mut());
        let mut direct = vec![ZERO; op.size()];
        from_faer_col(&m, &mut direct);
        // compare up to the additive constant (the GMRES result was recentered)
        let mut worst = 0.0f64;
        for i in 0..op.size() {
            if i == p {
                continue;
            }
            worst = worst.max((sol.phi[0].coeffs()[i] - direct[i]).norm());
        }
        assert!(worst < 1e-9, "GMRES vs LU disagreement {worst:.3e}");
    }
}
