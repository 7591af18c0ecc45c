//! Fourier ⊗ Hermite basis on `T^n × R^n` and coefficient tensors over it.
//!
//! Functions are expanded as
//!
//! ```text
//!   f(x, y) = Σ_{k,α} c[k,α] · e^{2πi k·x} · h_α(y),   |k_i| ≤ N_F, |α| ≤ N_H
//! ```
//!
//! where `h_α(y) = Π_j ĥ_{α_j}(y_j/β)` are probabilists' Hermite polynomials
//! normalized to be orthonormal under the Gaussian weight `N(0, β² I)` with
//! `β² = σ²/2` — exactly the invariant velocity marginal of the drift-free
//! dynamics. That choice makes the Ornstein–Uhlenbeck part of the generator
//! diagonal (`−|α|/τ`) and turns multiplication by `y_j` and `∂_{y_j}` into
//! ladder maps:
//!
//! ```text
//!   y_j h_α   = β(√(α_j+1) h_{α+e_j} + √α_j h_{α−e_j})
//!   ∂_{y_j} h_α = (√α_j / β) h_{α−e_j}
//! ```
//!
//! Hermite multi-indices are truncated by total degree `|α| ≤ N_H` and
//! enumerated in graded lexicographic order; Fourier indices run over the box
//! `[−N_F, N_F]^n` in row-major order.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug)]
pub struct Basis {
    n: usize,
    n_f: usize,
    n_h: usize,
    /// Hermite weight scale: the basis is orthonormal under `N(0, β² I)`.
    beta: f64,
    /// Graded-lex list of Hermite multi-indices with `|α| ≤ N_H`.
    herm: Vec<Vec<u32>>,
    herm_rank: HashMap<Vec<u32>, usize>,
    /// `up[j][a] = rank(α + e_j)` when still inside the truncation.
    up: Vec<Vec<Option<u32>>>,
    /// `down[j][a] = rank(α − e_j)` when `α_j > 0`.
    down: Vec<Vec<Option<u32>>>,
    /// √m for m = 0..=N_H+1.
    sqrt_int: Vec<f64>,
}

fn enumerate_multi_indices(n: usize, max_total: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    // graded: by total degree, then lexicographic within a degree
    fn rec(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: usize) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u32;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v as u32;
            rec(out, cur, pos + 1, left - v);
        }
    }
    for d in 0..=max_total {
        rec(&mut out, &mut cur, 0, d);
    }
    out
}

impl Basis {
    pub fn new(params: &ModelParams, n_f: usize, n_h: usize) -> Result<Arc<Self>> {
        if n_h < 1 {
            return Err(Error::Validation("hermite cutoff must be >= 1".into()));
        }
        let n = params.n;
        let herm = enumerate_multi_indices(n, n_h);
        let herm_rank: HashMap<Vec<u32>, usize> =
            herm.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let mut up = vec![vec![None; herm.len()]; n];
        let mut down = vec![vec![None; herm.len()]; n];
        for (i, a) in herm.iter().enumerate() {
            for j in 0..n {
                let mut b = a.clone();
                b[j] += 1;
                if let Some(&r) = herm_rank.get(&b) {
                    up[j][i] = Some(r as u32);
                }
                if a[j] > 0 {
                    let mut b = a.clone();
                    b[j] -= 1;
                    down[j][i] = Some(herm_rank[&b] as u32);
                }
            }
        }
        let sqrt_int: Vec<f64> = (0..=n_h + 1).map(|m| (m as f64).sqrt()).collect();
        Ok(Arc::new(Basis {
            n,
            n_f,
            n_h,
            beta: params.sigma / std::f64::consts::SQRT_2,
            herm,
            herm_rank,
            up,
            down,
            sqrt_int,
        }))
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn fourier_cutoff(&self) -> usize {
        self.n_f
    }
    pub fn hermite_cutoff(&self) -> usize {
        self.n_h
    }
    /// Std of the Gaussian Hermite weight (`β = σ/√2`).
    pub fn hermite_scale(&self) -> f64 {
        self.beta
    }

    pub fn n_fourier(&self) -> usize {
        (2 * self.n_f + 1).pow(self.n as u32)
    }
    pub fn n_hermite(&self) -> usize {
        self.herm.len()
    }
    pub fn size(&self) -> usize {
        self.n_fourier() * self.n_hermite()
    }

    pub fn hermite_indices(&self) -> &[Vec<u32>] {
        &self.herm
    }

    pub fn hermite_rank(&self, alpha: &[u32]) -> Option<usize> {
        self.herm_rank.get(alpha).copied()
    }

    pub fn hermite_up(&self, j: usize, rank: usize) -> Option<usize> {
        self.up[j][rank].map(|r| r as usize)
    }
    pub fn hermite_down(&self, j: usize, rank: usize) -> Option<usize> {
        self.down[j][rank].map(|r| r as usize)
    }
    pub fn sqrt_int(&self, m: usize) -> f64 {
        self.sqrt_int[m]
    }

    /// Row-major rank of a Fourier wave vector, if inside the box.
    pub fn fourier_rank(&self, k: &[i32]) -> Option<usize> {
        let w = 2 * self.n_f as i64 + 1;
        let mut idx: i64 = 0;
        for &kj in k {
            let kj = kj as i64;
            if kj.abs() > self.n_f as i64 {
                return None;
            }
            idx = idx * w + (kj + self.n_f as i64);
        }
        Some(idx as usize)
    }

    /// Wave vector for a Fourier rank.
    pub fn fourier_vec(&self, mut rank: usize) -> Vec<i32> {
        let w = 2 * self.n_f + 1;
        let mut k = vec![0i32; self.n];
        for j in (0..self.n).rev() {
            k[j] = (rank % w) as i32 - self.n_f as i32;
            rank /= w;
        }
        k
    }

    /// Fourier rank of `−k` given the rank of `k`.
    pub fn fourier_flip(&self, rank: usize) -> usize {
        let w = 2 * self.n_f + 1;
        let mut rest = rank;
        let mut digits = vec![0usize; self.n];
        for j in (0..self.n).rev() {
            digits[j] = rest % w;
            rest /= w;
        }
        let mut out = 0usize;
        for j in 0..self.n {
            out = out * w + (w - 1 - digits[j]);
        }
        out
    }

    #[inline]
    pub fn flat(&self, k_rank: usize, a_rank: usize) -> usize {
        k_rank * self.n_hermite() + a_rank
    }

    /// Orthonormal Hermite values `ĥ_0(z) … ĥ_{max}(z)` by the three-term
    /// recurrence `ĥ_{m+1} = (z ĥ_m − √m ĥ_{m−1})/√(m+1)`.
    pub fn hermite_values(&self, z: f64, max: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if max == 0 {
            return;
        }
        out.push(z);
        for m in 1..max {
            let next = (z * out[m] - self.sqrt_int[m] * out[m - 1]) / self.sqrt_int[m + 1];
            out.push(next);
        }
    }
}

/// A function on `T^n × R^n` represented by its coefficient tensor.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    basis: Arc<Basis>,
    /// Flat layout: `c[fourier_rank * n_hermite + hermite_rank]`.
    coeffs: Vec<Complex64>,
}

impl CoefficientField {
    pub fn zero(basis: Arc<Basis>) -> Self {
        let len = basis.size();
        CoefficientField { basis, coeffs: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_coeffs(basis: Arc<Basis>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), basis.size());
        CoefficientField { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at `(k, α)`; zero when outside the truncation.
    pub fn get(&self, k: &[i32], alpha: &[u32]) -> Complex64 {
        match (self.basis.fourier_rank(k), self.basis.hermite_rank(alpha)) {
            (Some(kr), Some(ar)) => self.coeffs[self.basis.flat(kr, ar)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn set(&mut self, k: &[i32], alpha: &[u32], v: Complex64) {
        let kr = self.basis.fourier_rank(k).expect("k outside basis");
        let ar = self.basis.hermite_rank(alpha).expect("alpha outside basis");
        let idx = self.basis.flat(kr, ar);
        self.coeffs[idx] = v;
    }

    /// Pointwise evaluation. O(basis size) — diagnostics and oracles only;
    /// bulk grid evaluation lives in the quadrature module.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Complex64 {
        let b = &self.basis;
        let n = b.n;
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        // 1-D Hermite values per coordinate
        let mut hv: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut buf = Vec::new();
        for j in 0..n {
            b.hermite_values(y[j] / b.beta, b.n_h, &mut buf);
            hv.push(buf.clone());
        }
        // 1-D Fourier phases per coordinate: e^{2πi k x_j}, k = −N_F..N_F
        let w = 2 * b.n_f + 1;
        let mut fv: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for j in 0..n {
            let e1 = Complex64::from_polar(1.0, 2.0 * PI * x[j]);
            let mut row = vec![Complex64::new(0.0, 0.0); w];
            row[b.n_f] = Complex64::new(1.0, 0.0);
            for m in 1..=b.n_f {
                row[b.n_f + m] = row[b.n_f + m - 1] * e1;
                row[b.n_f - m] = row[b.n_f - m + 1] * e1.conj();
            }
            fv.push(row);
        }
        let nh = b.n_hermite();
        // Hermite products per rank
        let mut hprod = vec![0.0f64; nh];
        for (a_rank, alpha) in b.herm.iter().enumerate() {
            let mut p = 1.0;
            for j in 0..n {
                p *= hv[j][alpha[j] as usize];
            }
            hprod[a_rank] = p;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for k_rank in 0..b.n_fourier() {
            let k = b.fourier_vec(k_rank);
            let mut fp = Complex64::new(1.0, 0.0);
            for j in 0..n {
                fp *= fv[j][(k[j] + b.n_f as i32) as usize];
            }
            let base = k_rank * nh;
            let mut slice_acc = Complex64::new(0.0, 0.0);
            for a_rank in 0..nh {
                slice_acc += self.coeffs[base + a_rank] * hprod[a_rank];
            }
            acc += fp * slice_acc;
        }
        acc
    }

    /// Evaluate a field that ought to be real; error if the imaginary part
    /// is not negligible relative to the field's magnitude.
    pub fn eval_real(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let z = self.eval(x, y);
        let scale = 1.0 + self.sup_coeff();
        if z.im.abs() > 1e-9 * scale {
            return Err(Error::Solver(format!(
                "field expected real but Im = {} at x={x:?}, y={y:?}",
                z.im
            )));
        }
        Ok(z.re)
    }

    /// Coefficients of `y_j · f`, truncated at the Hermite cutoff.
    pub fn mul_y(&self, j: usize) -> CoefficientField {
        let b = &self.basis;
        let nh = b.n_hermite();
        let mut out = CoefficientField::zero(self.basis.clone());
        for k_rank in 0..b.n_fourier() {
            let base = k_rank * nh;
            for a_rank in 0..nh {
                let c = self.coeffs[base + a_rank];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let aj = b.herm[a_rank][j] as usize;
                if let Some(up) = b.hermite_up(j, a_rank) {
                    out.coeffs[base + up] += c * (b.beta * b.sqrt_int(aj + 1));
                }
                if let Some(dn) = b.hermite_down(j, a_rank) {
                    out.coeffs[base + dn] += c * (b.beta * b.sqrt_int(aj));
                }
            }
        }
        out
    }

    /// Coefficients of `∂_{y_j} f` (exact: differentiation only lowers degree).
    pub fn diff_y(&self, j: usize) -> CoefficientField {
        let b = &self.basis;
        let nh = b.n_hermite();
        let mut out = CoefficientField::zero(self.basis.clone());
        for k_rank in 0..b.n_fourier() {
            let base = k_rank * nh;
            for a_rank in 0..nh {
                let c = self.coeffs[base + a_rank];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let aj = b.herm[a_rank][j] as usize;
                if let Some(dn) = b.hermite_down(j, a_rank) {
                    out.coeffs[base + dn] += c * (b.sqrt_int(aj) / b.beta);
                }
            }
        }
        out
    }

    /// Weighted-space inner product `⟨f, g⟩ = ∫ f ḡ φ_β dx dy = Σ c_f conj(c_g)`.
    pub fn inner(&self, other: &CoefficientField) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sup_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `∫ f ρ dx dy` where `ρ = r · φ_β`: the x-integral pairs `k` with `−k`
    /// and the Hermite factor is orthonormal, so the contraction is
    /// `Σ_{k,α} f[k,α] · r[−k,α]` — exact, no quadrature.
    pub fn contract_density(&self, r: &CoefficientField) -> Complex64 {
        let b = &self.basis;
        let nh = b.n_hermite();
        let mut acc = Complex64::new(0.0, 0.0);
        for k_rank in 0..b.n_fourier() {
            let flip = b.fourier_flip(k_rank);
            let base = k_rank * nh;
            let fbase = flip * nh;
            for a_rank in 0..nh {
                acc += self.coeffs[base + a_rank] * r.coeffs[fbase + a_rank];
            }
        }
        acc
    }

    /// The field with coefficients `conj(c[−k, α])` — equal to `self` exactly
    /// when the represented function is real-valued.
    pub fn flip_conj(&self) -> CoefficientField {
        let b = &self.basis;
        let nh = b.n_hermite();
        let mut out = CoefficientField::zero(self.basis.clone());
        for k_rank in 0..b.n_fourier() {
            let flip = b.fourier_flip(k_rank);
            for a_rank in 0..nh {
                out.coeffs[b.flat(k_rank, a_rank)] = self.coeffs[b.flat(flip, a_rank)].conj();
            }
        }
        out
    }

    /// Max deviation from the conjugate symmetry `c[−k,α] = conj(c[k,α])`
    /// that characterizes real-valued fields.
    pub fn conj_symmetry_error(&self) -> f64 {
        let b = &self.basis;
        let nh = b.n_hermite();
        let mut worst = 0.0f64;
        for k_rank in 0..b.n_fourier() {
            let flip = b.fourier_flip(k_rank);
            for a_rank in 0..nh {
                let d = self.coeffs[b.flat(flip, a_rank)] - self.coeffs[b.flat(k_rank, a_rank)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn scale(&mut self, s: Complex64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &CoefficientField, s: Complex64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }
}
