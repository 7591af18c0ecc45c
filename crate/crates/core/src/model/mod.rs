//! Model definition: periodic drift fields on the torus, physical parameters,
//! and phase-space states.
//!
//! The dynamics under study is the inertial Langevin system on `T^n × R^n`
//!
//! ```text
//!   dx = y/√τ dt
//!   dy = v(x)/√τ dt − y/τ dt + (σ/√τ) dβ
//! ```
//!
//! with `y = √τ ẋ` the scaled velocity. Drifts are finite Fourier series
//! `v(x) = Σ_k v̂(k) e^{2πi k·x}` with conjugate-symmetric coefficients so the
//! field is real. A drift may carry the potential it was derived from
//! (`v = −∇V`), which unlocks closed-form oracles (Gibbs density, overdamped
//! reference diffusivity).
//!
//! Positions are stored as a canonical representative in `[0,1)^n` plus an
//! exact integer winding vector: homogenization runs to times `~ ε⁻²` where
//! the displacement is huge, and `canonical + winding` keeps full precision
//! where `x` alone would have lost the fractional part.

pub mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "this complex quantity should have been real".
const IM_TOL: f64 = 1e-12;

/// Physical parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Particle relaxation time, `τ > 0`.
    pub tau: f64,
    /// Noise amplitude, `σ > 0`.
    pub sigma: f64,
    /// Space dimension, `n ≥ 1`.
    pub n: usize,
}

impl ModelParams {
    pub fn new(tau: f64, sigma: f64, n: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Validation(format!("tau must be positive, got {tau}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Validation(format!("sigma must be positive, got {sigma}")));
        }
        if n == 0 {
            return Err(Error::Validation("dimension n must be >= 1".into()));
        }
        Ok(Self { tau, sigma, n })
    }
}

/// A smooth periodic drift `v: T^n → R^n` given as a finite Fourier series,
/// optionally tagged with the potential it is the negative gradient of.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    n: usize,
    /// Wave vector → complex amplitude per component. BTreeMap so iteration
    /// order (and hence every downstream summation order) is deterministic.
    coeffs: BTreeMap<Vec<i32>, Vec<Complex64>>,
    /// Present iff the drift was built from a potential: `v̂(k) = −2πi k V̂(k)`.
    potential: Option<BTreeMap<Vec<i32>, Complex64>>,
}

fn neg_key(k: &[i32]) -> Vec<i32> {
    k.iter().map(|&c| -c).collect()
}

impl DriftSpec {
    /// Build a drift from raw Fourier data, enforcing the realness invariants.
    pub fn new(n: usize, coeffs: BTreeMap<Vec<i32>, Vec<Complex64>>) -> Result<Self> {
        Self::with_potential(n, coeffs, None)
    }

    /// The zero drift in dimension `n` (free dynamics).
    pub fn zero(n: usize) -> Self {
        Self::new(n, BTreeMap::new()).expect("zero drift is valid")
    }

    pub fn with_potential(
        n: usize,
        mut coeffs: BTreeMap<Vec<i32>, Vec<Complex64>>,
        potential: Option<BTreeMap<Vec<i32>, Complex64>>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("dimension n must be >= 1".into()));
        }
        // Drop exact zero entries so the support is canonical.
        coeffs.retain(|_, c| c.iter().any(|z| z.re != 0.0 || z.im != 0.0));
        for (k, c) in &coeffs {
            if k.len() != n {
                return Err(Error::Validation(format!(
                    "wave vector {k:?} has length {}, expected {n}",
                    k.len()
                )));
            }
            if c.len() != n {
                return Err(Error::Validation(format!(
                    "coefficient at k={k:?} has {} components, expected {n}",
                    c.len()
                )));
            }
            if c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation(format!("non-finite coefficient at k={k:?}")));
            }
            // Conjugate symmetry: coeff(−k) = conj(coeff(k)), componentwise.
            let mk = neg_key(k);
            let cm = coeffs.get(&mk).ok_or_else(|| {
                Error::Validation(format!(
                    "conjugate symmetry broken: k={k:?} present but -k={mk:?} missing"
                ))
            })?;
            for j in 0..n {
                let d = cm[j] - c[j].conj();
                let scale = 1.0 + c[j].norm();
                if d.norm() > IM_TOL * scale {
                    return Err(Error::Validation(format!(
                        "conjugate symmetry broken at k={k:?}, component {j}: \
                         coeff(-k)={} vs conj(coeff(k))={}",
                        cm[j],
                        c[j].conj()
                    )));
                }
            }
        }
        if let Some(pot) = &potential {
            for (k, p) in pot {
                if k.len() != n {
                    return Err(Error::Validation(format!(
                        "potential wave vector {k:?} has length {}, expected {n}",
                        k.len()
                    )));
                }
                let mk = neg_key(k);
                let pm = pot.get(&mk).ok_or_else(|| {
                    Error::Validation(format!(
                        "potential conjugate symmetry broken: k={k:?} present, -k missing"
                    ))
                })?;
                if (pm - p.conj()).norm() > IM_TOL * (1.0 + p.norm()) {
                    return Err(Error::Validation(format!(
                        "potential conjugate symmetry broken at k={k:?}"
                    )));
                }
                // The drift must actually be −∇V.
                for j in 0..n {
                    let expect = -Complex64::new(0.0, 2.0 * PI * k[j] as f64) * p;
                    let got = coeffs
                        .get(k)
                        .map(|c| c[j])
                        .unwrap_or(Complex64::new(0.0, 0.0));
                    if (got - expect).norm() > IM_TOL * (1.0 + expect.norm()) {
                        return Err(Error::Validation(format!(
                            "drift is not -grad(potential) at k={k:?}, component {j}: \
                             got {got}, expected {expect}"
                        )));
                    }
                }
            }
        }
        Ok(Self { n, coeffs, potential })
    }

    /// Dimension `n` of the torus.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Fourier support radius: `max_k max_j |k_j|` over nonzero modes.
    pub fn support_radius(&self) -> i32 {
        self.coeffs
            .keys()
            .flat_map(|k| k.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// The Fourier coefficients, keyed by wave vector.
    pub fn fourier_coeffs(&self) -> &BTreeMap<Vec<i32>, Vec<Complex64>> {
        &self.coeffs
    }

    /// The potential coefficients if the drift is a negative gradient.
    pub fn gradient_potential(&self) -> Option<&BTreeMap<Vec<i32>, Complex64>> {
        self.potential.as_ref()
    }

    pub fn is_gradient(&self) -> bool {
        self.potential.is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Evaluate `v(x)` by direct Fourier summation, verifying that the
    /// imaginary residual stays below 1e-12 before discarding it.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(x.len(), self.n, "point dimension mismatch");
        let mut acc = vec![Complex64::new(0.0, 0.0); self.n];
        for (k, c) in &self.coeffs {
            let phase: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
            let e = Complex64::from_polar(1.0, 2.0 * PI * phase);
            for j in 0..self.n {
                acc[j] += c[j] * e;
            }
        }
        for (j, z) in acc.iter().enumerate() {
            if z.im.abs() > IM_TOL {
                return Err(Error::Validation(format!(
                    "drift evaluation has imaginary residual {} in component {j}",
                    z.im
                )));
            }
        }
        Ok(acc.iter().map(|z| z.re).collect())
    }

    /// Evaluate the potential `V(x)` (gradient drifts only).
    pub fn eval_potential(&self, x: &[f64]) -> Result<f64> {
        let pot = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::Validation("drift carries no potential".into()))?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, p) in pot {
            let phase: f64 = k.iter().zip(x).map(|(&ki, &xi)| ki as f64 * xi).sum();
            acc += p * Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        if acc.im.abs() > IM_TOL {
            return Err(Error::Validation(format!(
                "potential evaluation has imaginary residual {}",
                acc.im
            )));
        }
        Ok(acc.re)
    }

    /// Compile a real-arithmetic evaluator for hot loops. The series is folded
    /// into `v(x) = c₀ + Σ_{k∈half} 2·Re(v̂(k) e^{2πik·x})` over one
    /// representative per conjugate pair, which is real by construction (no
    /// per-call residual check needed).
    pub fn evaluator(&self) -> DriftEval {
        let mut zero_mode = vec![0.0; self.n];
        if let Some(c0) = self.coeffs.get(&vec![0i32; self.n]) {
            for j in 0..self.n {
                zero_mode[j] = c0[j].re;
            }
        }
        let mut modes = Vec::new();
        for (k, c) in &self.coeffs {
            // Keep the representative whose first nonzero component is positive.
            match k.iter().find(|&&ki| ki != 0) {
                Some(&ki) if ki > 0 => {
                    let kf: Vec<f64> = k.iter().map(|&v| v as f64).collect();
                    modes.push((kf, c.clone()));
                }
                _ => {}
            }
        }
        DriftEval { n: self.n, zero_mode, modes }
    }

    // ---- serialization ----------------------------------------------------

    pub fn to_json(&self) -> String {
        let doc = DriftSpecJson::from(self);
        serde_json::to_string_pretty(&doc).expect("drift serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DriftSpecJson =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("drift file: {e}")))?;
        doc.build()
    }
}

/// Flattened, realified drift evaluator for the integrator's inner loop.
#[derive(Debug, Clone)]
pub struct DriftEval {
    n: usize,
    zero_mode: Vec<f64>,
    /// (k as f64 vector, full complex amplitude) for one representative of
    /// each ±k pair.
    modes: Vec<(Vec<f64>, Vec<Complex64>)>,
}

impl DriftEval {
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.zero_mode);
        for (k, c) in &self.modes {
            let mut phase = 0.0;
            for j in 0..self.n {
                phase += k[j] * x[j];
            }
            let (s, co) = (2.0 * PI * phase).sin_cos();
            for j in 0..self.n {
                out[j] += 2.0 * (c[j].re * co - c[j].im * s);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty() && self.zero_mode.iter().all(|&v| v == 0.0)
    }
}

/// Build a drift from potential coefficients: `v = −∇V`, i.e.
/// `v̂_j(k) = −2πi k_j V̂(k)`. The potential is retained on the result.
pub fn drift_from_potential(
    potential: BTreeMap<Vec<i32>, Complex64>,
    n: usize,
) -> Result<DriftSpec> {
    let mut coeffs: BTreeMap<Vec<i32>, Vec<Complex64>> = BTreeMap::new();
    for (k, p) in &potential {
        if k.len() != n {
            return Err(Error::Validation(format!(
                "potential wave vector {k:?} has length {}, expected {n}",
                k.len()
            )));
        }
        let c: Vec<Complex64> = (0..n)
            .map(|j| -Complex64::new(0.0, 2.0 * PI * k[j] as f64) * p)
            .collect();
        coeffs.insert(k.clone(), c);
    }
    DriftSpec::with_potential(n, coeffs, Some(potential))
}

// ---- presets ---------------------------------------------------------------

/// Zero drift in one dimension; every downstream quantity is known in closed
/// form (`K² = σ²`, `Φ = √τ y`, uniform ⊗ Gaussian invariant law).
pub fn preset_flat() -> DriftSpec {
    DriftSpec::new(1, BTreeMap::new()).expect("flat preset is valid")
}

/// Gradient drift from `V(x) = A·cos(2πx)` with `A = 1/2`, so
/// `v(x) = π·sin(2πx)`. The workhorse fixture: Gibbs-form density, depleted
/// diffusivity, overdamped limit all available as oracles.
pub fn preset_cosine_gradient() -> DriftSpec {
    let mut pot = BTreeMap::new();
    pot.insert(vec![1], Complex64::new(0.25, 0.0));
    pot.insert(vec![-1], Complex64::new(0.25, 0.0));
    drift_from_potential(pot, 1).expect("cosine preset is valid")
}

/// Non-gradient 1-D fixture: `v(x) = 0.4 + sin(2πx) + 0.5·cos(4πx)`.
/// In one dimension a drift fails to be a gradient exactly when its mean is
/// nonzero, so this exercises the ballistic centering `v̄ ≠ 0`.
pub fn preset_two_mode_nongradient() -> DriftSpec {
    let mut coeffs = BTreeMap::new();
    coeffs.insert(vec![0], vec![Complex64::new(0.4, 0.0)]);
    // sin(2πx) = (e^{2πix} − e^{−2πix}) / 2i
    coeffs.insert(vec![1], vec![Complex64::new(0.0, -0.5)]);
    coeffs.insert(vec![-1], vec![Complex64::new(0.0, 0.5)]);
    // 0.5·cos(4πx)
    coeffs.insert(vec![2], vec![Complex64::new(0.25, 0.0)]);
    coeffs.insert(vec![-2], vec![Complex64::new(0.25, 0.0)]);
    DriftSpec::new(1, coeffs).expect("two-mode preset is valid")
}

/// Resolve a preset by its CLI name.
pub fn preset_by_name(name: &str) -> Option<DriftSpec> {
    match name {
        "flat" => Some(preset_flat()),
        "cosine-gradient" => Some(preset_cosine_gradient()),
        "two-mode-nongradient" => Some(preset_two_mode_nongradient()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["flat", "cosine-gradient", "two-mode-nongradient"];

// ---- JSON schema ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CoeffEntry {
    k: Vec<i32>,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PotentialEntry {
    k: Vec<i32>,
    re: f64,
    im: f64,
}

/// On-disk drift document:
/// `{"n": int, "coeffs": [{"k": [..], "re": [..], "im": [..]}], "potential": [..]?}`.
/// Round-trips are bit-stable for finite doubles (shortest-roundtrip floats).
#[derive(Serialize, Deserialize)]
struct DriftSpecJson {
    n: usize,
    coeffs: Vec<CoeffEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    potential: Option<Vec<PotentialEntry>>,
}

impl From<&DriftSpec> for DriftSpecJson {
    fn from(spec: &DriftSpec) -> Self {
        let coeffs = spec
            .coeffs
            .iter()
            .map(|(k, c)| CoeffEntry {
                k: k.clone(),
                re: c.iter().map(|z| z.re).collect(),
                im: c.iter().map(|z| z.im).collect(),
            })
            .collect();
        let potential = spec.potential.as_ref().map(|pot| {
            pot.iter()
                .map(|(k, p)| PotentialEntry { k: k.clone(), re: p.re, im: p.im })
                .collect()
        });
        DriftSpecJson { n: spec.n, coeffs, potential }
    }
}

impl DriftSpecJson {
    fn build(self) -> Result<DriftSpec> {
        let mut coeffs = BTreeMap::new();
        for e in self.coeffs {
            if e.re.len() != self.n || e.im.len() != self.n {
                return Err(Error::Validation(format!(
                    "coefficient entry at k={:?} has wrong arity",
                    e.k
                )));
            }
            let c: Vec<Complex64> = e
                .re
                .iter()
                .zip(&e.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect();
            if coeffs.insert(e.k.clone(), c).is_some() {
                return Err(Error::Validation(format!("duplicate wave vector {:?}", e.k)));
            }
        }
        let potential = match self.potential {
            None => None,
            Some(entries) => {
                let mut pot = BTreeMap::new();
                for e in entries {
                    if pot.insert(e.k.clone(), Complex64::new(e.re, e.im)).is_some() {
                        return Err(Error::Validation(format!(
                            "duplicate potential wave vector {:?}",
                            e.k
                        )));
                    }
                }
                Some(pot)
            }
        };
        DriftSpec::with_potential(self.n, coeffs, potential)
    }
}

// ---- phase-space state -------------------------------------------------------

/// Phase point with winding-resolved position.
///
/// `x` is the canonical torus representative in `[0,1)^n`; `winding` counts
/// how many times each coordinate has wrapped, so the physical displacement is
/// `winding + x` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub winding: Vec<i64>,
    pub y: Vec<f64>,
}

impl PhaseState {
    /// Start a trajectory at raw position `x0` (any reals) and velocity `y0`.
    pub fn new(x0: &[f64], y0: &[f64]) -> Self {
        assert_eq!(x0.len(), y0.len());
        let mut x = x0.to_vec();
        let mut winding = vec![0i64; x0.len()];
        for j in 0..x.len() {
            let f = x[j].floor();
            winding[j] = f as i64;
            x[j] -= f;
            // Guard the half-open invariant against rounding at the seam.
            if x[j] >= 1.0 {
                x[j] -= 1.0;
                winding[j] += 1;
            }
        }
        PhaseState { x, winding, y: y0.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Unbounded displacement, `winding + canonical`.
    pub fn displacement(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.winding)
            .map(|(&xi, &wi)| wi as f64 + xi)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, n: usize, kmax: i32) -> DriftSpec {
        let mut coeffs: BTreeMap<Vec<i32>, Vec<Complex64>> = BTreeMap::new();
        let mut keys: Vec<Vec<i32>> = Vec::new();
        match n {
            1 => {
                for k in 1..=kmax {
                    keys.push(vec![k]);
                }
            }
            2 => {
                for k1 in -kmax..=kmax {
                    for k2 in -kmax..=kmax {
                        if (k1, k2) > (0, 0) {
                            keys.push(vec![k1, k2]);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        for k in keys {
            let c: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            coeffs.insert(neg_key(&k), c.iter().map(|z| z.conj()).collect());
            coeffs.insert(k, c);
        }
        // real zero mode
        let c0: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .collect();
        coeffs.insert(vec![0; n], c0);
        DriftSpec::new(n, coeffs).unwrap()
    }

    #[test]
    fn cosine_drift_values() {
        let spec = preset_cosine_gradient();
        // v(x) = 2π·A·sin(2πx) with A = 1/2
        let v0 = spec.eval(&[0.0]).unwrap();
        assert!(v0[0].abs() < 1e-14);
        let vq = spec.eval(&[0.25]).unwrap();
        assert!((vq[0] - PI).abs() < 1e-13, "v(1/4) = {} != pi", vq[0]);
    }

    #[test]
    fn eval_matches_independent_summation_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kmax) in &[(1usize, 6i32), (2, 3)] {
            let spec = random_spec(&mut rng, n, kmax);
            for _ in 0..100 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let v = spec.eval(&x).unwrap();
                // Independent oracle: real trigonometric form, reversed order.
                let mut w = vec![0.0; n];
                for (k, c) in spec.fourier_coeffs().iter().rev() {
                    let phase: f64 =
                        2.0 * PI * k.iter().zip(&x).map(|(&ki, &xi)| ki as f64 * xi).sum::<f64>();
                    for j in 0..n {
                        w[j] += c[j].re * phase.cos() - c[j].im * phase.sin();
                    }
                }
                for j in 0..n {
                    assert!((v[j] - w[j]).abs() < 1e-12, "mismatch {} vs {}", v[j], w[j]);
                }
            }
        }
    }

    #[test]
    fn evaluator_agrees_with_checked_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n, kmax) in &[(1usize, 5i32), (2, 3)] {
            let spec = random_spec(&mut rng, n, kmax);
            let fast = spec.evaluator();
            let mut out = vec![0.0; n];
            for _ in 0..200 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
                let xc: Vec<f64> = x.iter().map(|v| v.rem_euclid(1.0)).collect();
                fast.eval_into(&xc, &mut out);
                let slow = spec.eval(&xc).unwrap();
                for j in 0..n {
                    assert!((out[j] - slow[j]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn periodicity_and_realness() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let spec = random_spec(&mut rng, 2, 3);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let v = spec.eval(&x).unwrap(); // internal Im check < 1e-12
            for j in 0..2 {
                let mut xs = x.clone();
                xs[j] += 1.0;
                // eval is a plain Fourier sum: integer shifts change the phase
                // by whole periods.
                let vs_raw = {
                    let mut acc = vec![Complex64::new(0.0, 0.0); 2];
                    for (k, c) in spec.fourier_coeffs() {
                        let phase: f64 =
                            k.iter().zip(&xs).map(|(&ki, &xi)| ki as f64 * xi).sum();
                        let e = Complex64::from_polar(1.0, 2.0 * PI * phase);
                        for jj in 0..2 {
                            acc[jj] += c[jj] * e;
                        }
                    }
                    acc
                };
                for jj in 0..2 {
                    assert!((vs_raw[jj].re - v[jj]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn broken_symmetry_rejected() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![1], vec![Complex64::new(1.0, 2.0)]);
        // missing -1 entirely
        assert!(matches!(DriftSpec::new(1, coeffs.clone()), Err(Error::Validation(_))));
        // wrong conjugate
        coeffs.insert(vec![-1], vec![Complex64::new(1.0, 2.0)]);
        assert!(matches!(DriftSpec::new(1, coeffs), Err(Error::Validation(_))));
    }

    #[test]
    fn potential_gradient_examples() {
        // V = 0 → zero drift
        let spec = drift_from_potential(BTreeMap::new(), 1).unwrap();
        assert!(spec.is_zero());

        // V(x) = A cos(2πx): coefficient A/2 at k=1 → drift coefficient −πiA
        let a = 0.8;
        let mut pot = BTreeMap::new();
        pot.insert(vec![1], Complex64::new(a / 2.0, 0.0));
        pot.insert(vec![-1], Complex64::new(a / 2.0, 0.0));
        let spec = drift_from_potential(pot, 1).unwrap();
        let c1 = spec.fourier_coeffs().get(&vec![1]).unwrap()[0];
        let expect = Complex64::new(0.0, -PI * a);
        assert!((c1 - expect).norm() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        // random symmetric potential on T^2
        let mut pot = BTreeMap::new();
        for k1 in -2i32..=2 {
            for k2 in -2i32..=2 {
                if (k1, k2) > (0, 0) {
                    let p = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                    pot.insert(vec![k1, k2], p);
                    pot.insert(vec![-k1, -k2], p.conj());
                }
            }
        }
        let spec = drift_from_potential(pot, 2).unwrap();
        // Richardson-extrapolated central difference kills the h² term,
        // which this potential's large third derivatives would otherwise
        // push above the tolerance.
        let h = 1e-3;
        let central = |x: &[f64], j: usize, h: f64| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            -(spec.eval_potential(&xp).unwrap() - spec.eval_potential(&xm).unwrap()) / (2.0 * h)
        };
        let mut sup = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let v = spec.eval(&x).unwrap();
            for j in 0..2 {
                let fd = (4.0 * central(&x, j, h / 2.0) - central(&x, j, h)) / 3.0;
                sup = sup.max((v[j] - fd).abs());
            }
        }
        assert!(sup < 1e-6, "sup gradient error {sup}");
    }

    #[test]
    fn json_round_trip_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let spec = random_spec(&mut rng, 2, 2);
        let text = spec.to_json();
        let back = DriftSpec::from_json(&text).unwrap();
        assert_eq!(spec, back);
        assert_eq!(text, back.to_json());

        let grad = preset_cosine_gradient();
        let text = grad.to_json();
        let back = DriftSpec::from_json(&text).unwrap();
        assert_eq!(grad, back);
        assert!(back.is_gradient());
    }

    #[test]
    fn winding_arithmetic() {
        let s = PhaseState::new(&[2.75, -0.25], &[0.0, 0.0]);
        assert_eq!(s.winding, vec![2, -1]);
        assert!((s.x[0] - 0.75).abs() < 1e-15);
        assert!((s.x[1] - 0.75).abs() < 1e-15);
        let d = s.displacement();
        assert!((d[0] - 2.75).abs() < 1e-15);
        assert!((d[1] + 0.25).abs() < 1e-15);
        for v in &s.x {
            assert!((0.0..1.0).contains(v));
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 1).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 1).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0).is_err());
    }
}
