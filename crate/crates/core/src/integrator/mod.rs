//! Time integration of the kinetic system
//!
//! ```text
//!   dx =  y/√τ dt
//!   dy =  v(x)/√τ dt − y/τ dt + (σ/√τ) dβ
//! ```
//!
//! The workhorse scheme is Strang splitting: a half kick `y += (h/2) v(x)/√τ`
//! on either side of the exact Ornstein–Uhlenbeck sub-flow.  "Exact" includes
//! the position: over one OU leg, `(y, ∫y/√τ)` is jointly Gaussian with a
//! closed-form 2×2 covariance per component, so for v = 0 the scheme samples
//! the true transition law — no discretization error at all, which is what
//! the exactness-based acceptance checks lean on.  An Euler–Maruyama stepper
//! rides along as a cross-check; it consumes the same per-step noise pair
//! through the pathwise identity σΔβ = √τ·(OU y-noise) + (OU x-noise), so
//! the two schemes can be coupled on identical Brownian increments.

pub mod ensemble;

pub use ensemble::{run_ensemble, run_ensemble_sequential, EnsembleResult, InitialLaw};

use crate::error::{Error, Result};
use crate::model::{DriftSpec, ModelParams, PhaseState};

/// Which stepper advances the paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    SplittingStrang,
    EulerMaruyama,
}

/// Knobs for a simulation run.  `dt` is a target: the actual step is
/// `T_final / N` with `N = ceil(T_final/dt)`, so the horizon is always hit
/// exactly with uniform steps of size ≤ dt.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// master seed; path `p` draws from an independent counter-derived stream
    pub seed: u64,
    pub path_count: usize,
    /// number of coarse recording intervals across `[0, T_final]`
    pub records: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, scheme: Scheme, seed: u64, path_count: usize) -> Self {
        IntegratorConfig { dt, t_final, scheme, seed, path_count, records: 100 }
    }

    /// Errors on malformed values, returns human-readable warnings for legal
    /// but suspicious ones.  `t_final = 0` is allowed as the degenerate
    /// single-record run.
    pub fn validate(&self, params: &ModelParams) -> Result<Vec<String>> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::Validation(format!(
                "T_final must be nonnegative, got {}",
                self.t_final
            )));
        }
        if self.t_final > 0.0 && self.dt >= self.t_final {
            return Err(Error::Validation(format!(
                "dt = {} must be smaller than T_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.path_count == 0 {
            return Err(Error::Validation("path_count must be at least 1".into()));
        }
        if self.records == 0 {
            return Err(Error::Validation("records must be at least 1".into()));
        }
        let mut warnings = Vec::new();
        if self.scheme == Scheme::EulerMaruyama && self.dt >= 0.5 * params.tau {
            warnings.push(format!(
                "dt = {} does not resolve the OU half-life τ/2 = {}; Euler–Maruyama \
                 will be strongly biased",
                self.dt,
                0.5 * params.tau
            ));
        }
        Ok(warnings)
    }

    /// Default step for a given model: min(τ/10, 1e-2).
    pub fn default_dt(params: &ModelParams) -> f64 {
        (params.tau / 10.0).min(1e-2)
    }
}

/// Per-step constants of the exact OU pair update at step size `h`:
/// with a = e^{−h/τ},
///
/// ```text
///   y' = a·y + w,                      w  = (σ/√τ) ∫ e^{−(h−s)/τ} dβ_s
///   x' = x + √τ(1−a)·y + u,            u  =  σ     ∫ (1−e^{−(h−s)/τ}) dβ_s
/// ```
///
/// Var w = σ²(1−a²)/2, Var u = σ²(h − 2τ(1−a) + τ(1−a²)/2),
/// Cov(u,w) = σ²√τ((1−a) − (1−a²)/2).  The Var u / Cov expressions cancel
/// catastrophically for h ≪ τ, so below ε = h/τ = 0.01 they switch to their
/// power series (coefficients verified against the closed forms in tests).
#[derive(Debug, Clone, Copy)]
pub(crate) struct StrangCoeffs {
    pub h: f64,
    /// e^{−h/τ}
    pub a: f64,
    /// √τ(1−a) — deterministic x gain per unit y
    pub c_mean: f64,
    /// half-kick factor h/(2√τ)
    pub kick: f64,
    /// Cholesky of [[Var w, Cov],[Cov, Var u]]: w = l_yy·g1,
    /// u = l_xy·g1 + l_xx·g2
    pub l_yy: f64,
    pub l_xy: f64,
    pub l_xx: f64,
    pub sqrt_tau: f64,
    pub inv_sqrt_tau: f64,
    pub inv_tau: f64,
}

impl StrangCoeffs {
    pub fn new(params: &ModelParams, h: f64) -> Self {
        let tau = params.tau;
        let sigma = params.sigma;
        let eps = h / tau;
        let a = (-eps).exp();
        let one_minus_a = -(-eps).exp_m1();
        let one_minus_a2 = -(-2.0 * eps).exp_m1();
        let s2 = sigma * sigma;
        let var_w = 0.5 * s2 * one_minus_a2;
        let (var_u, cov) = if eps < 0.01 {
            // leading orders ε³/3 and ε²/2; truncation ~ε⁸ resp. ε⁷
            let var_u = s2
                * tau
                * eps.powi(3)
                * (1.0 / 3.0
                    + eps * (-0.25 + eps * (7.0 / 60.0 + eps * (-1.0 / 24.0 + eps * 31.0 / 2520.0))));
            let cov = s2
                * tau.sqrt()
                * eps.powi(2)
                * (0.5 + eps * (-0.5 + eps * (7.0 / 24.0 + eps * (-0.125 + eps * 31.0 / 720.0))));
            (var_u, cov)
        } else {
            let var_u = s2 * tau * (eps - 2.0 * one_minus_a + 0.5 * one_minus_a2);
            let cov = s2 * tau.sqrt() * (one_minus_a - 0.5 * one_minus_a2);
            (var_u, cov)
        };
        let l_yy = var_w.sqrt();
        let (l_xy, l_xx) = if var_w > 0.0 {
            (cov / l_yy, (var_u - cov * cov / var_w).max(0.0).sqrt())
        } else {
            (0.0, 0.0)
        };
        StrangCoeffs {
            h,
            a,
            c_mean: tau.sqrt() * one_minus_a,
            kick: 0.5 * h / tau.sqrt(),
            l_yy,
            l_xy,
            l_xx,
            sqrt_tau: tau.sqrt(),
            inv_sqrt_tau: 1.0 / tau.sqrt(),
            inv_tau: 1.0 / tau,
        }
    }

    /// Var(σΔβ) of the reconstructed Brownian increment — algebraically
    /// τ·Var w + 2√τ·Cov + Var u = σ²h; kept as a method so tests can pin it.
    #[cfg(test)]
    pub fn sigma_db_variance(&self) -> f64 {
        let var_w = self.l_yy * self.l_yy;
        let cov = self.l_xy * self.l_yy;
        let var_u = self.l_xy * self.l_xy + self.l_xx * self.l_xx;
        self.sqrt_tau * self.sqrt_tau * var_w + 2.0 * self.sqrt_tau * cov + var_u
    }
}

/// Flat mutable path state used by the hot loops: canonical position,
/// winding counts, velocity, and the running Brownian coordinate
/// (σ·β reconstructed pathwise from the step noises).
#[derive(Debug, Clone)]
pub(crate) struct RawState {
    pub x: Vec<f64>,
    pub winding: Vec<i64>,
    pub y: Vec<f64>,
    pub sigma_beta: Vec<f64>,
    /// Brownian increment σΔβ of the most recent step (for QV accumulation).
    pub dsb: Vec<f64>,
}

impl RawState {
    pub fn from_phase(state: &PhaseState) -> Self {
        RawState {
            x: state.x.clone(),
            winding: state.winding.clone(),
            y: state.y.clone(),
            sigma_beta: vec![0.0; state.dim()],
            dsb: vec![0.0; state.dim()],
        }
    }

    pub fn to_phase(&self) -> PhaseState {
        PhaseState { x: self.x.clone(), winding: self.winding.clone(), y: self.y.clone() }
    }

    fn wrap(&mut self) {
        for j in 0..self.x.len() {
            let f = self.x[j].floor();
            if f != 0.0 {
                self.winding[j] += f as i64;
                self.x[j] -= f;
            }
            if self.x[j] >= 1.0 {
                // seam guard: x − floor(x) can round up to exactly 1.0
                self.x[j] -= 1.0;
                self.winding[j] += 1;
            }
        }
    }

    fn check_finite(&self, path: usize, time: f64) -> Result<()> {
        let bad = self
            .x
            .iter()
            .chain(&self.y)
            .chain(&self.sigma_beta)
            .any(|v| !v.is_finite());
        if bad {
            return Err(Error::Integration {
                path,
                time,
                message: "state became non-finite".into(),
            });
        }
        Ok(())
    }
}

/// Reusable stepper: precomputed step constants, a compiled drift evaluator,
/// and a cache of v(x) that survives across the kick–OU–kick boundary (the
/// closing half-kick and the next step's opening half-kick see the same x,
/// so one evaluation serves both — bitwise identical to evaluating twice).
pub(crate) struct Stepper {
    pub coeffs: StrangCoeffs,
    scheme: Scheme,
    drift: crate::model::DriftEval,
    drift_is_zero: bool,
    v_buf: Vec<f64>,
    v_valid: bool,
    n: usize,
}

impl Stepper {
    pub fn new(params: &ModelParams, drift: &DriftSpec, scheme: Scheme, h: f64) -> Self {
        Stepper {
            coeffs: StrangCoeffs::new(params, h),
            scheme,
            drift: drift.evaluator(),
            drift_is_zero: drift.is_zero(),
            v_buf: vec![0.0; params.n],
            v_valid: false,
            n: params.n,
        }
    }

    fn drift_at(&mut self, x: &[f64]) {
        if !self.v_valid {
            self.drift.eval_into(x, &mut self.v_buf);
            self.v_valid = true;
        }
    }

    /// Advance one step.  `noise` holds 2n standard normals laid out as
    /// (g1_0, g2_0, g1_1, g2_1, …): the exact OU update is a joint draw of
    /// (y, ∫y) per component and genuinely needs two normals per axis.
    pub fn step(&mut self, s: &mut RawState, noise: &[f64]) {
        debug_assert_eq!(noise.len(), 2 * self.n);
        let c = self.coeffs;
        match self.scheme {
            Scheme::SplittingStrang => {
                if !self.drift_is_zero {
                    self.drift_at(&s.x);
                    for j in 0..self.n {
                        s.y[j] += c.kick * self.v_buf[j];
                    }
                }
                for j in 0..self.n {
                    let (g1, g2) = (noise[2 * j], noise[2 * j + 1]);
                    let w = c.l_yy * g1;
                    let u = c.l_xy * g1 + c.l_xx * g2;
                    s.x[j] += c.c_mean * s.y[j] + u;
                    s.y[j] = c.a * s.y[j] + w;
                    // pathwise Brownian reconstruction: σΔβ = √τ·w + u
                    s.dsb[j] = c.sqrt_tau * w + u;
                    s.sigma_beta[j] += s.dsb[j];
                }
                s.wrap();
                if !self.drift_is_zero {
                    self.v_valid = false;
                    self.drift_at(&s.x);
                    for j in 0..self.n {
                        s.y[j] += c.kick * self.v_buf[j];
                    }
                    // cache stays valid: x is untouched until the next OU leg
                }
            }
            Scheme::EulerMaruyama => {
                self.drift_at(&s.x);
                for j in 0..self.n {
                    let (g1, g2) = (noise[2 * j], noise[2 * j + 1]);
                    // the same Brownian increment the Strang step would see,
                    // so the two schemes are coupled pathwise
                    let sigma_db = (c.sqrt_tau * c.l_yy + c.l_xy) * g1 + c.l_xx * g2;
                    let y_old = s.y[j];
                    s.x[j] += c.h * c.inv_sqrt_tau * y_old;
                    s.y[j] += c.h * (c.inv_sqrt_tau * self.v_buf[j] - c.inv_tau * y_old)
                        + c.inv_sqrt_tau * sigma_db;
                    s.dsb[j] = sigma_db;
                    s.sigma_beta[j] += sigma_db;
                }
                s.wrap();
                self.v_valid = false;
            }
        }
    }
}

/// One trajectory on a coarse recording grid.
#[derive(Debug, Clone)]
pub struct PathSample {
    /// recording times, starting at 0
    pub times: Vec<f64>,
    /// full phase state at each recording time
    pub states: Vec<PhaseState>,
    /// winding-resolved position at each recording time
    pub displacement: Vec<Vec<f64>>,
}

/// Advance a single step functionally.  `noise` is 2n standard normals,
/// (g1, g2) per component — the exact OU leg draws the pair (y, ∫y) jointly.
pub fn step(
    state: &PhaseState,
    params: &ModelParams,
    drift: &DriftSpec,
    scheme: Scheme,
    dt: f64,
    noise: &[f64],
) -> Result<PhaseState> {
    if noise.len() != 2 * params.n {
        return Err(Error::Validation(format!(
            "expected {} noise values (two per component), got {}",
            2 * params.n,
            noise.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Validation(format!("dt must be positive, got {dt}")));
    }
    let mut stepper = Stepper::new(params, drift, scheme, dt);
    let mut raw = RawState::from_phase(state);
    stepper.step(&mut raw, noise);
    raw.check_finite(0, dt)?;
    Ok(raw.to_phase())
}

/// Uniform fine grid with coarse record indices: N = ceil(T/dt) steps of
/// size T/N, records at round(r·N/R) for r = 0..=R (deduplicated, sorted).
pub(crate) fn step_plan(t_final: f64, dt: f64, records: usize) -> (usize, f64, Vec<usize>) {
    if t_final == 0.0 {
        return (0, 0.0, vec![0]);
    }
    let n_steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / n_steps as f64;
    let r = records.min(n_steps);
    let mut idx: Vec<usize> = (0..=r)
        .map(|i| ((i as f64 / r as f64) * n_steps as f64).round() as usize)
        .collect();
    idx.dedup();
    (n_steps, h, idx)
}

/// Fill `buf` with 2n standard normals from the path's stream, fixed order.
pub(crate) fn draw_noise(rng: &mut impl rand::Rng, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = rng.sample(rand_distr::StandardNormal);
    }
}

/// Simulate one path.  The result is a deterministic function of
/// (config.seed, path_index) alone: the stream is `seed` with the ChaCha
/// counter set to the path index, so neither thread count nor the number of
/// other paths in flight can touch it.
pub fn simulate_path(
    params: &ModelParams,
    drift: &DriftSpec,
    x0: &[f64],
    y0: &[f64],
    config: &IntegratorConfig,
    path_index: u64,
) -> Result<PathSample> {
    use rand::SeedableRng;
    config.validate(params)?;
    if x0.len() != params.n || y0.len() != params.n {
        return Err(Error::Validation(format!(
            "initial condition dimension mismatch: got ({}, {}), model has n = {}",
            x0.len(),
            y0.len(),
            params.n
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(path_index);
    let init = PhaseState::new(x0, y0);
    let (n_steps, h, record_idx) = step_plan(config.t_final, config.dt, config.records);
    if n_steps == 0 {
        let displacement = vec![init.displacement()];
        return Ok(PathSample { times: vec![0.0], states: vec![init], displacement });
    }

    let mut stepper = Stepper::new(params, drift, config.scheme, h);
    let mut raw = RawState::from_phase(&init);
    let mut noise = vec![0.0f64; 2 * params.n];
    let mut times = Vec::with_capacity(record_idx.len());
    let mut states = Vec::with_capacity(record_idx.len());
    let mut displacement = Vec::with_capacity(record_idx.len());
    let mut next_record = 0usize;
    for step_no in 0..=n_steps {
        if next_record < record_idx.len() && record_idx[next_record] == step_no {
            times.push(step_no as f64 * h);
            let phase = raw.to_phase();
            displacement.push(phase.displacement());
            states.push(phase);
            next_record += 1;
        }
        if step_no == n_steps {
            break;
        }
        draw_noise(&mut rng, &mut noise);
        stepper.step(&mut raw, &noise);
        raw.check_finite(path_index as usize, (step_no + 1) as f64 * h)?;
    }
    Ok(PathSample { times, states, displacement })
}

/// Diffusive rescaling: x_ε(t) = ε·x(ε⁻²t) − ε⁻¹·v̄·t on the coarse grid.
/// Times are multiplied by ε², displacements by ε with the ballistic part
/// removed; the microscopic states ride along unchanged (corrector
/// evaluations downstream need them in original coordinates).
pub fn rescale_path(path: &PathSample, eps: f64, v_bar: &[f64]) -> Result<PathSample> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    if path.times.is_empty() {
        return Err(Error::Validation("cannot rescale an empty path".into()));
    }
    let times: Vec<f64> = path.times.iter().map(|t| eps * eps * t).collect();
    let displacement: Vec<Vec<f64>> = path
        .displacement
        .iter()
        .zip(&path.times)
        .map(|(d, &t)| {
            d.iter()
                .zip(v_bar)
                // ε·x(t) − ε⁻¹·v̄·(ε²t) = ε·(x(t) − v̄·t)
                .map(|(&di, &vb)| eps * (di - vb * t))
                .collect()
        })
        .collect();
    Ok(PathSample { times, states: path.states.clone(), displacement })
}
