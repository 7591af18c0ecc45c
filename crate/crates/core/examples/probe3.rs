use homog_core::model::{preset_by_name, ModelParams};
use homog_core::spectral::{assemble_generator, invariant_density, Basis};

fn main() {
    let params = ModelParams::new(1.0, 1.0, 1).unwrap();
    let drift = preset_by_name("cosine-gradient").unwrap();
    let basis = Basis::new(&params, 16, 64).unwrap();
    let op = assemble_generator(&drift, &params, &basis).unwrap();
    let density = invariant_density(&op).unwrap();
    let g = &density.g;
    let b = g.basis();
    // max |coefficient| per total Hermite degree
    let mut per_level = vec![0.0f64; 65];
    for k_rank in 0..b.n_fourier() {
        for (a_rank, alpha) in b.hermite_indices().iter().enumerate() {
            let deg: u32 = alpha.iter().sum();
            let c = g.coeffs()[b.flat(k_rank, a_rank)].norm();
            let slot = &mut per_level[deg as usize];
            if c > *slot { *slot = c; }
        }
    }
    for (deg, v) in per_level.iter().enumerate() {
        if deg % 8 == 0 || deg < 3 {
            println!("degree {deg:>3}: max |g| = {v:.3e}");
        }
    }
}
