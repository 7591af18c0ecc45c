//! Numerical laboratory for periodic homogenization of the inertial
//! Langevin dynamics
//!
//! ```text
//!   dx = τ^{-1/2} y dt,
//!   dy = τ^{-1/2} v(x) dt − τ^{-1} y dt + τ^{-1/2} σ dβ,
//! ```
//!
//! with `x` on the unit torus `T^n` and a smooth periodic drift `v`. Over
//! diffusive space–time scales the position process behaves like a Brownian
//! motion with an effective covariance `K²`, and this crate computes that
//! covariance two independent ways:
//!
//! * **spectrally** — assemble the generator on a Fourier ⊗ Hermite basis,
//!   find the invariant density, solve the cell problem, and contract
//!   (`spectral` module);
//! * **stochastically** — integrate the SDE, rescale diffusively, and
//!   estimate the covariance from an ensemble (`integrator` + `estimator`
//!   modules).
//!
//! The two answers cross-validate each other, and the `estimator` module
//! additionally measures how fast the rescaled process becomes Gaussian
//! (Wasserstein distances of projections, martingale quadratic variation,
//! empirical convergence rates in the scale parameter ε).

pub mod error;
pub mod estimator;
pub mod export;
pub mod integrator;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use estimator::{
    ergodicity_decay, martingale_decomposition_check, msd_diffusivity, projection_distance,
    projection_distance_with_ci, rate_fit, wasserstein_1d, wasserstein_1d_empirical, DecayCurve,
    MartingaleReport, MsdEstimate, ProjectionFunctional, RateStudyResult,
};
pub use integrator::{
    run_ensemble, run_ensemble_sequential, simulate_path, EnsembleResult, InitialLaw,
    IntegratorConfig, PathSample, Scheme,
};
pub use model::{DriftSpec, ModelParams, PhaseState};
