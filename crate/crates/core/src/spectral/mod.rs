//! Spectral side of the laboratory: Galerkin discretization of the generator
//! on a Fourier ⊗ Hermite basis, invariant-density and cell-problem solves,
//! and the effective-diffusivity contraction.

pub mod basis;
pub mod diffusivity;
pub mod operator;
pub mod quadrature;
pub mod sampler;
pub mod solve;

pub use basis::{Basis, CoefficientField};
pub use diffusivity::{
    effective_diffusivity, run_pipeline, smoluchowski_diffusivity_1d, truncation_study,
    DiffusivityResult, PipelineRun, TruncationRow, TruncationStudy,
};
pub use operator::{assemble_generator, SpectralOperator};
pub use quadrature::{gauss_hermite, grid_eval, GaussHermite, QuadratureRule};
pub use sampler::{sample_invariant_measure, sample_with_rate};
pub use solve::{
    dense_singular_values, invariant_density, mean_drift, solve_cell_problem, CellSolution,
    InvariantDensity,
};
