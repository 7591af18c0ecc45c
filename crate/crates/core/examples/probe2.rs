use homog_core::model::{preset_by_name, ModelParams};
use homog_core::spectral::run_pipeline;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "anisotropic" => {
            // separate the Fourier and Hermite bottlenecks, cosine tau=1 sigma=1
            let params = ModelParams::new(1.0, 1.0, 1).unwrap();
            let drift = preset_by_name("cosine-gradient").unwrap();
            for (nf, nh) in [(16, 32), (24, 32), (32, 32), (32, 48), (32, 64), (16, 64), (12, 64), (12, 80), (16, 80), (16, 96)] {
                let t0 = Instant::now();
                match run_pipeline(&drift, &params, nf, nh) {
                    Ok(run) => println!(
                        "({nf},{nh}) K2 = {:.16e}  [{:?}]",
                        run.diffusivity.matrix[0],
                        t0.elapsed()
                    ),
                    Err(e) => println!("({nf},{nh}) ERR {e}"),
                }
            }
        }
        "soft" => {
            // gentler coupling: smaller tau, larger sigma
            for (tau, sigma) in [(0.5f64, 1.4f64), (0.3, 1.5), (0.5, 1.0)] {
                let params = ModelParams::new(tau, sigma, 1).unwrap();
                let drift = preset_by_name("cosine-gradient").unwrap();
                println!("tau={tau} sigma={sigma}");
                let mut prev = None;
                for (nf, nh) in [(8, 8), (16, 16), (24, 24), (32, 32), (40, 40), (48, 48)] {
                    let t0 = Instant::now();
                    match run_pipeline(&drift, &params, nf, nh) {
                        Ok(run) => {
                            let k2 = run.diffusivity.matrix[0];
                            let d = prev.map(|p: f64| (p - k2).abs());
                            println!("  ({nf},{nh}) K2={k2:.14e} cauchy={d:?} [{:?}]", t0.elapsed());
                            prev = Some(k2);
                        }
                        Err(e) => println!("  ({nf},{nh}) ERR {e}"),
                    }
                }
            }
        }
        _ => eprintln!("usage: probe2 anisotropic|soft"),
    }
}
