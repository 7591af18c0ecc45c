//! Sparse assembly of the generator on the Fourier ⊗ Hermite basis.
//!
//! Acting on a basis element `φ_{k,α} = e^{2πik·x} h_α(y)`, the generator
//!
//! ```text
//!   L = τ^{-1/2}(y·∇_x + v(x)·∇_y) + τ^{-1}(−y·∇_y + (σ²/2) Δ_y)
//! ```
//!
//! produces three kinds of couplings:
//!
//! * OU part — diagonal with eigenvalue `−|α|/τ` (the Hermite functions are
//!   its eigenfunctions by construction of the weight).
//! * transport `y_j ∂_{x_j}` — multiplies by `2πi k_j` in Fourier and ladders
//!   the Hermite index: `(k, α) → (k, α ± e_j)` with weights
//!   `2πi k_j β √(α_j+1) / √τ` and `2πi k_j β √α_j / √τ`.
//! * drift `v_j(x) ∂_{y_j}` — shifts Fourier by each drift mode `m` and
//!   lowers the Hermite index: `(k, α) → (k+m, α−e_j)` with weight
//!   `v̂_j(m) √α_j / (β √τ)`.
//!
//! Couplings whose target falls outside the truncation are dropped — the
//! standard Galerkin projection. The exact coefficient convention above is
//! validated against the finite-difference generator oracle in the tests.
//!
//! Matrix convention: entries `A[p, q]` give the coefficient of `φ_p` in
//! `L φ_q`, so `apply` computes coefficients of `Lf` from coefficients of
//! `f`. The column of the constant element is identically zero (`L1 = 0`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DriftSpec, ModelParams};
use crate::spectral::basis::{Basis, CoefficientField};

#[derive(Debug)]
pub struct SpectralOperator {
    basis: Arc<Basis>,
    // CSR storage of A
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<Complex64>,
    /// `|α| / τ` per flat index — the (negated) OU diagonal, used as an
    /// iterative-solver preconditioner with the zero entries floored to `1/τ`.
    ou_diag: Vec<f64>,
    /// Largest entry magnitude; sets the scale for shifts and tolerances.
    scale: f64,
    /// Flat index of the constant basis element `(k=0, α=0)`.
    constant_rank: usize,
}

impl SpectralOperator {
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn constant_rank(&self) -> usize {
        self.constant_rank
    }

    pub fn ou_diag(&self) -> &[f64] {
        &self.ou_diag
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterate all stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.size()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |i| (r, self.col_idx[i] as usize, self.vals[i]))
        })
    }

    /// `out = A x` (coefficients of `Lf`).
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.size());
        assert_eq!(out.len(), self.size());
        for r in 0..self.size() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x[self.col_idx[i] as usize];
            }
            out[r] = acc;
        }
    }

    /// `out = A^H x`.
    pub fn apply_adjoint(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.size());
        assert_eq!(out.len(), self.size());
        out.fill(Complex64::new(0.0, 0.0));
        for r in 0..self.size() {
            let xr = x[r];
            if xr == Complex64::new(0.0, 0.0) {
                continue;
            }
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[i] as usize] += self.vals[i].conj() * xr;
            }
        }
    }

    pub fn apply_field(&self, f: &CoefficientField) -> CoefficientField {
        let mut out = CoefficientField::zero(self.basis.clone());
        self.apply(f.coeffs(), out.coeffs_mut());
        out
    }
}

/// Assemble the generator matrix for `drift` at the given cutoffs.
///
/// Errors when the drift's Fourier support radius exceeds `N_F`: then the
/// drift itself is not representable inside the box and the projected
/// operator silently loses its low-mode couplings (aliasing).
pub fn assemble_generator(
    drift: &DriftSpec,
    params: &ModelParams,
    basis: &Arc<Basis>,
) -> Result<SpectralOperator> {
    if drift.dim() != params.n || drift.dim() != basis.dim() {
        return Err(Error::Validation(format!(
            "dimension mismatch: drift n={}, params n={}, basis n={}",
            drift.dim(),
            params.n,
            basis.dim()
        )));
    }
    let n_f = basis.fourier_cutoff();
    let radius = drift.support_radius();
    if radius as usize > n_f {
        return Err(Error::Solver(format!(
            "aliasing: drift Fourier support radius {radius} exceeds the cutoff N_F={n_f}; \
             increase the Fourier cutoff to at least the drift support"
        )));
    }

    let n = basis.dim();
    let beta = basis.hermite_scale();
    let sqrt_tau = params.tau.sqrt();
    let nh = basis.n_hermite();
    let nf = basis.n_fourier();
    let size = basis.size();

    // drift modes as (fourier-shift vector, component j, v̂_j(m))
    let mut drift_modes: Vec<(Vec<i32>, usize, Complex64)> = Vec::new();
    for (m, comps) in drift.fourier_coeffs() {
        for (j, &c) in comps.iter().enumerate() {
            if c != Complex64::new(0.0, 0.0) {
                drift_modes.push((m.clone(), j, c));
            }
        }
    }

    let mut trip: Vec<(u32, u32, Complex64)> = Vec::new();
    let herm = basis.hermite_indices().to_vec();
    for k_rank in 0..nf {
        let k = basis.fourier_vec(k_rank);
        for a_rank in 0..nh {
            let col = (basis.flat(k_rank, a_rank)) as u32;
            let alpha = &herm[a_rank];
            let total: u32 = alpha.iter().sum();
            // OU diagonal
            if total > 0 {
                trip.push((col, col, Complex64::new(-(total as f64) / params.tau, 0.0)));
            }
            // transport y_j ∂x_j / √τ
            for j in 0..n {
                if k[j] == 0 {
                    continue;
                }
                let ik = Complex64::new(0.0, 2.0 * PI * k[j] as f64) * (beta / sqrt_tau);
                let aj = alpha[j] as usize;
                if let Some(up) = basis.hermite_up(j, a_rank) {
                    let row = basis.flat(k_rank, up) as u32;
                    trip.push((row, col, ik * basis.sqrt_int(aj + 1)));
                }
                if let Some(dn) = basis.hermite_down(j, a_rank) {
                    let row = basis.flat(k_rank, dn) as u32;
                    trip.push((row, col, ik * basis.sqrt_int(aj)));
                }
            }
            // drift v_j(x) ∂y_j / √τ
            if alpha.iter().any(|&a| a > 0) {
                for (m, j, c) in &drift_modes {
                    let aj = alpha[*j] as usize;
                    if aj == 0 {
                        continue;
                    }
                    let mut km = k.clone();
                    for (t, &mj) in km.iter_mut().zip(m.iter()) {
                        *t += mj;
                    }
                    let (Some(kr), Some(dn)) =
                        (basis.fourier_rank(&km), basis.hermite_down(*j, a_rank))
                    else {
                        continue;
                    };
                    let row = basis.flat(kr, dn) as u32;
                    trip.push((row, col, c * (basis.sqrt_int(aj) / (beta * sqrt_tau))));
                }
            }
        }
    }

    // sort by (row, col) and merge duplicates (mean drift shares the
    // (k, α−e_j) target with the transport down-ladder)
    trip.sort_unstable_by_key(|&(r, c, _)| ((r as u64) << 32) | c as u64);
    let mut counts = vec![0usize; size];
    let mut col_idx: Vec<u32> = Vec::with_capacity(trip.len());
    let mut vals: Vec<Complex64> = Vec::with_capacity(trip.len());
    let mut scale = 0.0f64;
    let mut i = 0;
    while i < trip.len() {
        let (r, c, mut v) = trip[i];
        i += 1;
        while i < trip.len() && trip[i].0 == r && trip[i].1 == c {
            v += trip[i].2;
            i += 1;
        }
        col_idx.push(c);
        vals.push(v);
        counts[r as usize] += 1;
        scale = scale.max(v.norm());
    }
    let mut row_ptr = vec![0usize; size + 1];
    for r in 0..size {
        row_ptr[r + 1] = row_ptr[r] + counts[r];
    }

    let mut ou_diag = vec![0.0f64; size];
    for k_rank in 0..nf {
        for a_rank in 0..nh {
            let total: u32 = herm[a_rank].iter().sum();
            ou_diag[basis.flat(k_rank, a_rank)] = total as f64 / params.tau;
        }
    }

    let constant_rank = basis.flat(
        basis.fourier_rank(&vec![0i32; n]).expect("origin always inside"),
        basis.hermite_rank(&vec![0u32; n]).expect("zero index present"),
    );

    let op = SpectralOperator {
        basis: basis.clone(),
        row_ptr,
        col_idx,
        vals,
        ou_diag,
        scale,
        constant_rank,
    };

    // structural sanity: the constant's column must be identically zero
    debug_assert!({
        let mut e = vec![Complex64::new(0.0, 0.0); op.size()];
        e[op.constant_rank] = Complex64::new(1.0, 0.0);
        let mut out = vec![Complex64::new(0.0, 0.0); op.size()];
        op.apply(&e, &mut out);
        out.iter().all(|z| z.norm() == 0.0)
    });

    Ok(op)
}
