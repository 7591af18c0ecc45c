//! Ensembles of rescaled paths with deterministic parallel execution.
//!
//! Each path owns an RNG stream derived from the master seed by the path
//! index (counter-based), simulates on the microscopic grid `[0, t_final]`,
//! and writes its records into a disjoint chunk of flat, path-major arrays.
//! All cross-path statistics are then reduced sequentially in index order.
//! Consequence: the result is a pure function of the configuration — thread
//! count, scheduling, and the presence or absence of the `parallel` feature
//! cannot change a single bit of it.
//!
//! Time-scale convention: the integrator runs in microscopic time, so
//! `config.t_final` is the microscopic horizon (T/ε² for a macroscopic
//! horizon T).  The result's `times` and `displacement` are diffusively
//! rescaled — `times` span `[0, ε²·t_final]` and displacements are
//! `ε·(x(t) − v̄·t)` — while `position`, `velocity`, and `sigma_beta` stay
//! microscopic because corrector evaluations need them in original
//! coordinates.

use super::{draw_noise, step_plan, IntegratorConfig, RawState, Stepper};
use crate::error::{Error, Result};
use crate::model::{DriftSpec, ModelParams, PhaseState};
use rand::SeedableRng;

/// Where paths start.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    /// Every path starts at the same phase point.
    FixedPoint { x0: Vec<f64>, y0: Vec<f64> },
    /// Path `p` starts at `samples[p]`; supply at least `path_count` draws
    /// (typically from the invariant-measure sampler).
    Invariant(Vec<PhaseState>),
}

/// Ensemble statistics plus the raw per-record tracks needed downstream.
///
/// Tracks are flat and path-major: entry `(path p, record r, component j)`
/// lives at `p·records·n + r·n + j`.  `qv_samples` is path-major `n×n`
/// row-major per path and accumulates the microscopic quadratic variation
/// Σ Δ(σβ)⊗Δ(σβ) over all fine steps (multiply by ε² for the rescaled
/// martingale's quadratic variation).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub eps: f64,
    pub n: usize,
    pub path_count: usize,
    /// number of records per path (recording-grid length)
    pub records: usize,
    /// macroscopic record times, `ε²·t_micro`, length `records`
    pub times: Vec<f64>,
    /// canonical microscopic position in `[0,1)^n` at each record
    pub position: Vec<f64>,
    /// microscopic velocity at each record
    pub velocity: Vec<f64>,
    /// reconstructed microscopic Brownian coordinate σβ at each record
    pub sigma_beta: Vec<f64>,
    /// rescaled displacement `ε·(x(t) − v̄·t)` at each record
    pub displacement: Vec<f64>,
    /// empirical covariance of the rescaled displacement per record,
    /// `records × n × n` row-major, mean-centered, divisor `path_count − 1`
    pub msd_curve: Vec<f64>,
    /// empirical `E exp(½‖σ⁻¹y‖²)` per record (microscopic y)
    pub moment_track: Vec<f64>,
    /// rescaled displacement at the final record, path-major `path_count × n`
    pub endpoint_samples: Vec<f64>,
    /// per-path quadratic-variation accumulators, `path_count × n × n`
    pub qv_samples: Vec<f64>,
    /// non-fatal configuration warnings surfaced by validation
    pub warnings: Vec<String>,
}

impl EnsembleResult {
    /// Rescaled displacement of one path at one record.
    pub fn displacement_at(&self, path: usize, record: usize) -> &[f64] {
        let i = (path * self.records + record) * self.n;
        &self.displacement[i..i + self.n]
    }

    /// Microscopic phase coordinates (x, y) of one path at one record.
    pub fn phase_at(&self, path: usize, record: usize) -> (&[f64], &[f64]) {
        let i = (path * self.records + record) * self.n;
        (&self.position[i..i + self.n], &self.velocity[i..i + self.n])
    }

    /// Microscopic σβ of one path at one record.
    pub fn sigma_beta_at(&self, path: usize, record: usize) -> &[f64] {
        let i = (path * self.records + record) * self.n;
        &self.sigma_beta[i..i + self.n]
    }

    /// Covariance matrix (row-major n×n) at one record.
    pub fn msd_at(&self, record: usize) -> &[f64] {
        &self.msd_curve[record * self.n * self.n..(record + 1) * self.n * self.n]
    }

    /// Quadratic-variation accumulator (row-major n×n) of one path.
    pub fn qv_of(&self, path: usize) -> &[f64] {
        &self.qv_samples[path * self.n * self.n..(path + 1) * self.n * self.n]
    }

    /// Endpoint sample (length n) of one path.
    pub fn endpoint_of(&self, path: usize) -> &[f64] {
        &self.endpoint_samples[path * self.n..(path + 1) * self.n]
    }
}

/// Per-path output slices, all disjoint across paths.
struct TrackSlices<'a> {
    position: &'a mut [f64],
    velocity: &'a mut [f64],
    sigma_beta: &'a mut [f64],
    displacement: &'a mut [f64],
    qv: &'a mut [f64],
}

struct EnsemblePlan<'a> {
    params: &'a ModelParams,
    drift: &'a DriftSpec,
    config: &'a IntegratorConfig,
    eps: f64,
    v_bar: &'a [f64],
    n_steps: usize,
    h: f64,
    record_idx: Vec<usize>,
}

impl EnsemblePlan<'_> {
    /// Simulate path `p` from `init`, writing records into `out`.
    fn run_path(&self, p: usize, init: &PhaseState, out: &mut TrackSlices) -> Result<()> {
        let n = self.params.n;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(p as u64);
        let mut stepper = if self.n_steps > 0 {
            Some(Stepper::new(self.params, self.drift, self.config.scheme, self.h))
        } else {
            None
        };
        let mut raw = RawState::from_phase(init);
        let mut noise = vec![0.0f64; 2 * n];
        let mut next_record = 0usize;
        for step_no in 0..=self.n_steps {
            if next_record < self.record_idx.len() && self.record_idx[next_record] == step_no {
                let t = step_no as f64 * self.h;
                let at = next_record * n;
                for j in 0..n {
                    out.position[at + j] = raw.x[j];
                    out.velocity[at + j] = raw.y[j];
                    out.sigma_beta[at + j] = raw.sigma_beta[j];
                    let disp = raw.winding[j] as f64 + raw.x[j];
                    out.displacement[at + j] = self.eps * (disp - self.v_bar[j] * t);
                }
                next_record += 1;
            }
            if step_no == self.n_steps {
                break;
            }
            draw_noise(&mut rng, &mut noise);
            let stepper = stepper.as_mut().expect("steps imply a stepper");
            stepper.step(&mut raw, &noise);
            raw.check_finite(p, (step_no + 1) as f64 * self.h)?;
            for a in 0..n {
                for b in 0..n {
                    out.qv[a * n + b] += raw.dsb[a] * raw.dsb[b];
                }
            }
        }
        Ok(())
    }
}

/// Run an ensemble with the library's default dispatch: data-parallel over
/// paths when the `parallel` feature is on, sequential otherwise.  Both
/// dispatches produce bit-identical results.
pub fn run_ensemble(
    params: &ModelParams,
    drift: &DriftSpec,
    config: &IntegratorConfig,
    eps: f64,
    v_bar: &[f64],
    initial_law: &InitialLaw,
) -> Result<EnsembleResult> {
    run_impl(params, drift, config, eps, v_bar, initial_law, cfg!(feature = "parallel"))
}

/// Run an ensemble strictly sequentially (always available; useful for
/// pinning down a failing path or benchmarking the dispatch overhead).
pub fn run_ensemble_sequential(
    params: &ModelParams,
    drift: &DriftSpec,
    config: &IntegratorConfig,
    eps: f64,
    v_bar: &[f64],
    initial_law: &InitialLaw,
) -> Result<EnsembleResult> {
    run_impl(params, drift, config, eps, v_bar, initial_law, false)
}

fn run_impl(
    params: &ModelParams,
    drift: &DriftSpec,
    config: &IntegratorConfig,
    eps: f64,
    v_bar: &[f64],
    initial_law: &InitialLaw,
    parallel: bool,
) -> Result<EnsembleResult> {
    let warnings = config.validate(params)?;
    let n = params.n;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    if v_bar.len() != n {
        return Err(Error::Validation(format!(
            "v_bar has {} components, model has n = {}",
            v_bar.len(),
            n
        )));
    }
    if drift.dim() != n {
        return Err(Error::Validation(format!(
            "drift dimension {} does not match model n = {}",
            drift.dim(),
            n
        )));
    }
    let paths = config.path_count;
    let initial: Vec<PhaseState> = match initial_law {
        InitialLaw::FixedPoint { x0, y0 } => {
            if x0.len() != n || y0.len() != n {
                return Err(Error::Validation(format!(
                    "initial point dimension mismatch: got ({}, {}), model has n = {}",
                    x0.len(),
                    y0.len(),
                    n
                )));
            }
            vec![PhaseState::new(x0, y0); paths]
        }
        InitialLaw::Invariant(samples) => {
            if samples.len() < paths {
                return Err(Error::Validation(format!(
                    "initial law supplies {} samples but path_count = {paths}",
                    samples.len()
                )));
            }
            if let Some(bad) = samples[..paths].iter().position(|s| s.dim() != n) {
                return Err(Error::Validation(format!(
                    "initial sample {bad} has dimension {}, model has n = {}",
                    samples[bad].dim(),
                    n
                )));
            }
            samples[..paths].to_vec()
        }
    };

    let (n_steps, h, record_idx) = step_plan(config.t_final, config.dt, config.records);
    let records = record_idx.len();
    let plan = EnsemblePlan { params, drift, config, eps, v_bar, n_steps, h, record_idx };

    let rn = records * n;
    let mut position = vec![0.0f64; paths * rn];
    let mut velocity = vec![0.0f64; paths * rn];
    let mut sigma_beta = vec![0.0f64; paths * rn];
    let mut displacement = vec![0.0f64; paths * rn];
    let mut qv_samples = vec![0.0f64; paths * n * n];

    if parallel {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            position
                .par_chunks_mut(rn)
                .zip(velocity.par_chunks_mut(rn))
                .zip(sigma_beta.par_chunks_mut(rn))
                .zip(displacement.par_chunks_mut(rn))
                .zip(qv_samples.par_chunks_mut(n * n))
                .enumerate()
                .try_for_each(|(p, ((((pos, vel), sb), disp), qv))| {
                    let mut out = TrackSlices {
                        position: pos,
                        velocity: vel,
                        sigma_beta: sb,
                        displacement: disp,
                        qv,
                    };
                    plan.run_path(p, &initial[p], &mut out)
                })?;
        }
        #[cfg(not(feature = "parallel"))]
        unreachable!("parallel dispatch requested without the parallel feature");
    } else {
        position
            .chunks_mut(rn)
            .zip(velocity.chunks_mut(rn))
            .zip(sigma_beta.chunks_mut(rn))
            .zip(displacement.chunks_mut(rn))
            .zip(qv_samples.chunks_mut(n * n))
            .enumerate()
            .try_for_each(|(p, ((((pos, vel), sb), disp), qv))| {
                let mut out = TrackSlices {
                    position: pos,
                    velocity: vel,
                    sigma_beta: sb,
                    displacement: disp,
                    qv,
                };
                plan.run_path(p, &initial[p], &mut out)
            })?;
    }

    // deterministic sequential reduction in path-index order
    let times: Vec<f64> = plan.record_idx.iter().map(|&i| eps * eps * (i as f64 * h)).collect();
    let mut msd_curve = vec![0.0f64; records * n * n];
    let mut moment_track = vec![0.0f64; records];
    let inv_2s2 = 0.5 / (params.sigma * params.sigma);
    let mut mean = vec![0.0f64; n];
    for r in 0..records {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for p in 0..paths {
            let d = &displacement[(p * records + r) * n..(p * records + r) * n + n];
            for j in 0..n {
                mean[j] += d[j];
            }
            let y = &velocity[(p * records + r) * n..(p * records + r) * n + n];
            let y2: f64 = y.iter().map(|v| v * v).sum();
            moment_track[r] += (y2 * inv_2s2).exp();
        }
        mean.iter_mut().for_each(|m| *m /= paths as f64);
        moment_track[r] /= paths as f64;
        if paths > 1 {
            let cov = &mut msd_curve[r * n * n..(r + 1) * n * n];
            for p in 0..paths {
                let d = &displacement[(p * records + r) * n..(p * records + r) * n + n];
                for a in 0..n {
                    for b in a..n {
                        cov[a * n + b] += (d[a] - mean[a]) * (d[b] - mean[b]);
                    }
                }
            }
            for a in 0..n {
                for b in a..n {
                    cov[a * n + b] /= (paths - 1) as f64;
                    cov[b * n + a] = cov[a * n + b];
                }
            }
        }
    }
    let mut endpoint_samples = vec![0.0f64; paths * n];
    let last = records - 1;
    for p in 0..paths {
        let d = &displacement[(p * records + last) * n..(p * records + last) * n + n];
        endpoint_samples[p * n..(p + 1) * n].copy_from_slice(d);
    }

    Ok(EnsembleResult {
        eps,
        n,
        path_count: paths,
        records,
        times,
        position,
        velocity,
        sigma_beta,
        displacement,
        msd_curve,
        moment_track,
        endpoint_samples,
        qv_samples,
        warnings,
    })
}
