//! Quadrature and fast tensor-grid evaluation for coefficient fields.
//!
//! Integrals against the invariant measure factor into an x-integral over
//! the torus (trigonometric polynomials — exact on an equispaced grid with
//! more points than the polynomial degree) and a y-integral against the
//! Gaussian weight (polynomials — exact under Gauss–Hermite with enough
//! nodes). Products of up to three basis fields therefore integrate
//! *exactly*, which is what makes quadrature a genuine cross-check for the
//! coefficient-space contractions rather than another approximation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::spectral::basis::{Basis, CoefficientField};

/// Gauss–Hermite rule for the *standard normal* weight: `∫ f dN(0,1) ≈ Σ w_i f(z_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `w_i · e^{+3z_i²/4}` without forming either factor: the ratio
    /// `e^{+z²/4}/Σ_m t_m(z_i)²` stays representable out to |z| ≈ 53,
    /// whereas `e^{−3z²/4}` underflows to zero past |z| ≈ 31 and would turn
    /// `w/damp³` into ∞·0 at the outer nodes of large rules.
    pub boosts: Vec<f64>,
}

/// Weighted orthonormal-Hermite values `t_m(z) = ĥ_m(z)·e^{−z²/4}` for
/// m = 0…max, by the same three-term recurrence as the bare polynomials
/// (the damping commutes with it).  Uniformly bounded in m and z by
/// Cramér's inequality, so no intermediate can overflow at any degree.
fn weighted_hermite_values(z: f64, max: usize, out: &mut Vec<f64>) {
    out.clear();
    out.push((-0.25 * z * z).exp());
    if max == 0 {
        return;
    }
    out.push(z * out[0]);
    for m in 1..max {
        let next = (z * out[m] - (m as f64).sqrt() * out[m - 1]) / ((m + 1) as f64).sqrt();
        out.push(next);
    }
}

/// Golub–Welsch seeds the nodes as eigenvalues of the Jacobi matrix of the
/// orthonormal-Hermite recurrence (off-diagonal `√m`); Newton on ĥ_q then
/// polishes each root, and the weights come from the Christoffel-number
/// identity `w_i = 1 / Σ_{m<q} ĥ_m(z_i)²`.  The eigensolver's own weights
/// (squared first eigenvector components) are *not* usable here: at the
/// outer nodes they sit ~e^{−z²/2} below the matrix scale, under the
/// eigensolver's absolute accuracy, and come back as rounding noise that
/// over-weights the tails by tens of orders of magnitude.  The Christoffel
/// sum evaluated through the damped recurrence is accurate at every node.
pub fn gauss_hermite(q: usize) -> GaussHermite {
    assert!(q >= 1);
    let mut jac = DMatrix::<f64>::zeros(q, q);
    for m in 1..q {
        let b = (m as f64).sqrt();
        jac[(m - 1, m)] = b;
        jac[(m, m - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Newton with the damped values: ĥ_q'(z) = √q·ĥ_{q−1}(z), and the
    // common e^{−z²/4} factor cancels in the ratio.
    let mut t = Vec::with_capacity(q + 1);
    for z in &mut nodes {
        for _ in 0..3 {
            weighted_hermite_values(*z, q, &mut t);
            let step = t[q] / ((q as f64).sqrt() * t[q - 1]);
            if !step.is_finite() {
                break;
            }
            *z -= step;
        }
    }

    // symmetrize: the rule is exactly symmetric in theory; enforce it so
    // downstream integrals of odd functions vanish identically
    let q2 = q / 2;
    for i in 0..q2 {
        let n = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -n;
        nodes[q - 1 - i] = n;
    }
    if q % 2 == 1 {
        nodes[q2] = 0.0;
    }

    // w_i = e^{−z²/2} / Σ_m t_m(z_i)², then one global normalization
    let mut weights = Vec::with_capacity(q);
    let mut boosts = Vec::with_capacity(q);
    for &z in &nodes {
        weighted_hermite_values(z, q - 1, &mut t);
        let k: f64 = t.iter().map(|v| v * v).sum();
        weights.push((-0.5 * z * z).exp() / k);
        boosts.push((0.25 * z * z).exp() / k);
    }
    for i in 0..q2 {
        let w = 0.5 * (weights[i] + weights[q - 1 - i]);
        weights[i] = w;
        weights[q - 1 - i] = w;
        let b = 0.5 * (boosts[i] + boosts[q - 1 - i]);
        boosts[i] = b;
        boosts[q - 1 - i] = b;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    for b in &mut boosts {
        *b /= total;
    }
    GaussHermite { nodes, weights, boosts }
}

/// Contract one axis of a row-major tensor with a matrix: the axis of length
/// `dims[axis]` is replaced by the matrix's column count, i.e.
/// `out[..., g, ...] = Σ_a in[..., a, ...] · mat[a][g]`.
fn contract_axis(
    data: &[Complex64],
    dims: &mut Vec<usize>,
    axis: usize,
    mat: &[Vec<Complex64>],
) -> Vec<Complex64> {
    let d_in = dims[axis];
    let d_out = mat[0].len();
    assert_eq!(mat.len(), d_in);
    let outer: usize = dims[..axis].iter().product();
    let inner: usize = dims[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * d_out * inner];
    for o in 0..outer {
        for a in 0..d_in {
            let src = (o * d_in + a) * inner;
            let row = &mat[a];
            for g in 0..d_out {
                let c = row[g];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let dst = (o * d_out + g) * inner;
                for i in 0..inner {
                    out[dst + i] += c * data[src + i];
                }
            }
        }
    }
    dims[axis] = d_out;
    out
}

/// Evaluate `f` on the tensor grid `xs[0] × … × xs[n-1] × (β·zs[0]) × … ×
/// (β·zs[n-1])`, i.e. the y grids are given in units of the Hermite scale.
/// Output is row-major with the x axes outermost. Cost is a handful of
/// axis-matrix contractions rather than `O(grid · basis)` pointwise sums.
pub fn grid_eval(f: &CoefficientField, xs: &[Vec<f64>], zs: &[Vec<f64>]) -> Vec<Complex64> {
    let b = f.basis();
    let n = b.dim();
    assert_eq!(xs.len(), n);
    assert_eq!(zs.len(), n);
    let nh1 = b.hermite_cutoff() + 1;
    let w = 2 * b.fourier_cutoff() + 1;

    // embed the total-degree Hermite set into the full tensor [0, N_H]^n
    let nf = b.n_fourier();
    let full: usize = nh1.pow(n as u32);
    let mut data = vec![Complex64::new(0.0, 0.0); nf * full];
    for k_rank in 0..nf {
        for (a_rank, alpha) in b.hermite_indices().iter().enumerate() {
            let mut t = 0usize;
            for j in 0..n {
                t = t * nh1 + alpha[j] as usize;
            }
            data[k_rank * full + t] = f.coeffs()[b.flat(k_rank, a_rank)];
        }
    }

    // dims: [w; n] (fourier axes) ++ [nh1; n] (hermite axes)
    let mut dims: Vec<usize> = std::iter::repeat(w)
        .take(n)
        .chain(std::iter::repeat(nh1).take(n))
        .collect();

    // Hermite axes (do them first: they only shrink the tensor)
    let mut vals = Vec::new();
    for j in 0..n {
        let mut mat = vec![vec![Complex64::new(0.0, 0.0); zs[j].len()]; nh1];
        for (g, &z) in zs[j].iter().enumerate() {
            b.hermite_values(z, b.hermite_cutoff(), &mut vals);
            for (a, row) in mat.iter_mut().enumerate() {
                row[g] = Complex64::new(vals[a], 0.0);
            }
        }
        data = contract_axis(&data, &mut dims, n + j, &mat);
    }
    // Fourier axes
    for j in 0..n {
        let mut mat = vec![vec![Complex64::new(0.0, 0.0); xs[j].len()]; w];
        for (g, &x) in xs[j].iter().enumerate() {
            for ki in 0..w {
                let k = ki as i32 - b.fourier_cutoff() as i32;
                mat[ki][g] = Complex64::from_polar(1.0, 2.0 * PI * k as f64 * x);
            }
        }
        data = contract_axis(&data, &mut dims, j, &mat);
    }
    data
}

/// Exact rule for μ-integrals of products of up to three coefficient fields:
/// equispaced x (degree ≤ 3·N_F) × Gauss–Hermite in z = y/β (degree ≤ 3·N_H).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub xs: Vec<Vec<f64>>,
    pub zs: Vec<Vec<f64>>,
    /// Flattened product weights matching the `grid_eval` layout.
    pub weights: Vec<f64>,
    /// Per-node Gaussian damping `Π_j e^{−z_j²/4}`, same layout.  Bare field
    /// values at the outer nodes grow like e^{+z²/4} times the coefficient
    /// tail; one damp factor per field keeps every stored value bounded by
    /// the coefficient norm, with the weights re-boosted to compensate.
    pub damp: Vec<f64>,
    /// `weights / damp³`, but assembled from the per-axis ratios so it stays
    /// finite after `damp³` has underflowed — the weight that pairs with a
    /// product of *three* damped evaluations.
    pub boost: Vec<f64>,
}

impl QuadratureRule {
    pub fn for_triple_products(basis: &Basis) -> Self {
        let m = 3 * basis.fourier_cutoff() + 1;
        let q = (3 * basis.hermite_cutoff()) / 2 + 1;
        Self::new(basis, m, q)
    }

    pub fn new(basis: &Basis, m: usize, q: usize) -> Self {
        let n = basis.dim();
        let gh = gauss_hermite(q);
        let xs: Vec<Vec<f64>> =
            vec![(0..m).map(|i| i as f64 / m as f64).collect(); n];
        let zs: Vec<Vec<f64>> = vec![gh.nodes.clone(); n];
        let mut weights = vec![1.0f64];
        let mut damp = vec![1.0f64];
        // x axes first (uniform weight 1/m), then z axes — mirrors grid_eval
        for _ in 0..n {
            let mut next = Vec::with_capacity(weights.len() * m);
            let mut dnext = Vec::with_capacity(damp.len() * m);
            for (&wo, &do_) in weights.iter().zip(&damp) {
                for _ in 0..m {
                    next.push(wo / m as f64);
                    dnext.push(do_);
                }
            }
            weights = next;
            damp = dnext;
        }
        for _ in 0..n {
            let mut next = Vec::with_capacity(weights.len() * q);
            let mut dnext = Vec::with_capacity(damp.len() * q);
            for (&wo, &do_) in weights.iter().zip(&damp) {
                for (&wz, &z) in gh.weights.iter().zip(&gh.nodes) {
                    next.push(wo * wz);
                    dnext.push(do_ * (-0.25 * z * z).exp());
                }
            }
            weights = next;
            damp = dnext;
        }
        QuadratureRule { xs, zs, weights, damp }
    }

    pub fn eval(&self, f: &CoefficientField) -> Vec<Complex64> {
        grid_eval(f, &self.xs, &self.zs)
    }

    /// Field values scaled by the per-node damp factor — bounded uniformly
    /// by the coefficient ℓ¹ norm (Cramér's inequality), so products of
    /// damped values never overflow regardless of cutoff.
    pub fn eval_damped(&self, f: &CoefficientField) -> Vec<Complex64> {
        let mut vals = grid_eval(f, &self.xs, &self.zs);
        for (v, &d) in vals.iter_mut().zip(&self.damp) {
            *v *= d;
        }
        vals
    }

    /// `Σ_i w_i Π_t factors[t][i]` — the μ-integral of a pointwise product
    /// when the factor values came from `eval` and one factor is the
    /// weighted density g (μ = g · uniform ⊗ N(0,β²)).
    pub fn integrate_product(&self, factors: &[&[Complex64]]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.weights.len() {
            let mut p = Complex64::new(self.weights[i], 0.0);
            for f in factors {
                p *= f[i];
            }
            acc += p;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn gauss_hermite_reproduces_normal_moments() {
        // N(0,1) moments: E z^{2m} = (2m−1)!!, odd vanish; Q=5 is exact
        // through degree 9.
        let gh = gauss_hermite(5);
        let expect = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0];
        for (p, &want) in expect.iter().enumerate() {
            let got: f64 = gh
                .nodes
                .iter()
                .zip(&gh.weights)
                .map(|(&z, &w)| w * z.powi(p as i32))
                .sum();
            assert!(
                (got - want).abs() < 1e-10 * (1.0 + want),
                "moment {p}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn grid_eval_matches_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2] {
            let params = ModelParams::new(0.9, 1.3, n).unwrap();
            let basis = crate::spectral::Basis::new(&params, 2, 4).unwrap();
            let mut f = CoefficientField::zero(basis.clone());
            for c in f.coeffs_mut() {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let xs: Vec<Vec<f64>> =
                (0..n).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
            let zs: Vec<Vec<f64>> =
                (0..n).map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
            let vals = grid_eval(&f, &xs, &zs);
            let beta = basis.hermite_scale();
            // walk the row-major layout and compare against direct eval
            let mut idx = 0;
            let xlens: Vec<usize> = xs.iter().map(|v| v.len()).collect();
            let zlens: Vec<usize> = zs.iter().map(|v| v.len()).collect();
            let mut counter = vec![0usize; 2 * n];
            loop {
                let x: Vec<f64> = (0..n).map(|j| xs[j][counter[j]]).collect();
                let y: Vec<f64> = (0..n).map(|j| beta * zs[j][counter[n + j]]).collect();
                let want = f.eval(&x, &y);
                let got = vals[idx];
                assert!((got - want).norm() < 1e-11 * (1.0 + want.norm()));
                idx += 1;
                // odometer
                let mut axis = 2 * n;
                loop {
                    if axis == 0 {
                        break;
                    }
                    axis -= 1;
                    counter[axis] += 1;
                    let lim = if axis < n { xlens[axis] } else { zlens[axis - n] };
                    if counter[axis] < lim {
                        break;
                    }
                    counter[axis] = 0;
                }
                if counter.iter().all(|&c| c == 0) {
                    break;
                }
            }
            assert_eq!(idx, vals.len());
        }
    }

    #[test]
    fn rule_reproduces_basis_orthonormality() {
        // ∫ φ_{k,α} conj(φ_{k',α'}) dx dN(0,β²) = δ — discretely exact.
        let params = ModelParams::new(1.0, 1.7, 1).unwrap();
        let basis = crate::spectral::Basis::new(&params, 2, 4).unwrap();
        let rule = QuadratureRule::for_triple_products(&basis);
        let mut fields = Vec::new();
        for kr in 0..basis.n_fourier() {
            for ar in 0..basis.n_hermite() {
                let mut f = CoefficientField::zero(Arc::clone(&basis));
                f.coeffs_mut()[basis.flat(kr, ar)] = Complex64::new(1.0, 0.0);
                fields.push(rule.eval(&f));
            }
        }
        for (i, fi) in fields.iter().enumerate() {
            for (j, fj) in fields.iter().enumerate() {
                let conj: Vec<Complex64> = fj.iter().map(|z| z.conj()).collect();
                let got = rule.integrate_product(&[fi, &conj]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (got - Complex64::new(want, 0.0)).norm() < 1e-12,
                    "({i},{j}): {got}"
                );
            }
        }
    }
}
