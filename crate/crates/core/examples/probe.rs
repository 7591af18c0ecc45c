use homog_core::model::{preset_by_name, ModelParams};
use homog_core::spectral::{run_pipeline, smoluchowski_diffusivity_1d, truncation_study};
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "fixture" => {
            // cosine tau=1 sigma=1 convergence ladder
            let params = ModelParams::new(1.0, 1.0, 1).unwrap();
            let drift = preset_by_name("cosine-gradient").unwrap();
            for (nf, nh) in [(8, 8), (12, 12), (16, 16), (24, 24), (32, 32)] {
                let t0 = Instant::now();
                match run_pipeline(&drift, &params, nf, nh) {
                    Ok(run) => println!(
                        "({nf},{nh}) K2 = {:.16e}  res {:.2e}  vbar {:.2e}  [{:?}]",
                        run.diffusivity.matrix[0],
                        run.cell.residuals.iter().cloned().fold(0.0f64, f64::max),
                        run.v_bar[0],
                        t0.elapsed()
                    ),
                    Err(e) => println!("({nf},{nh}) ERR {e}"),
                }
            }
        }
        "smol" => {
            let drift = preset_by_name("cosine-gradient").unwrap();
            let smol = smoluchowski_diffusivity_1d(&drift, 1.0).unwrap();
            println!("smol reference = {smol:.12}");
            for tau in [1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3] {
                let params = ModelParams::new(tau, 1.0, 1).unwrap();
                for (nf, nh) in [(16, 12), (24, 16), (32, 24)] {
                    let t0 = Instant::now();
                    match run_pipeline(&drift, &params, nf, nh) {
                        Ok(run) => {
                            let k2 = run.diffusivity.matrix[0];
                            println!(
                                "tau {tau:<8} ({nf},{nh}) K2 {:.10}  rel-gap {:+.4e}  [{:?}]",
                                k2,
                                k2 / smol - 1.0,
                                t0.elapsed()
                            );
                        }
                        Err(e) => println!("tau {tau} ({nf},{nh}) ERR {e}"),
                    }
                }
            }
        }
        "twomode" => {
            let params = ModelParams::new(0.4, 1.1, 1).unwrap();
            let drift = preset_by_name("two-mode-nongradient").unwrap();
            let mut prev: Option<f64> = None;
            for nh in [16usize, 24, 32, 48, 64, 96, 128] {
                let t0 = Instant::now();
                match run_pipeline(&drift, &params, 16, nh) {
                    Ok(run) => {
                        let k2 = run.diffusivity.matrix[0];
                        let d = prev.map(|p| format!("{:.2e}", (k2 - p).abs()));
                        println!(
                            "(16,{nh}) K2 = {k2:.14e}  vbar {:.12e}  res {:.2e} step {d:?} [{:?}]",
                            run.v_bar[0],
                            run.cell.residuals.iter().cloned().fold(0.0f64, f64::max),
                            t0.elapsed()
                        );
                        prev = Some(k2);
                    }
                    Err(e) => println!("(16,{nh}) ERR {e}"),
                }
            }
            // Fourier direction at converged Hermite
            for nf in [8usize, 16, 32] {
                match run_pipeline(&drift, &params, nf, 96) {
                    Ok(run) => println!("({nf},96) K2 = {:.14e}", run.diffusivity.matrix[0]),
                    Err(e) => println!("({nf},96) ERR {e}"),
                }
            }
        }
        "stab" => {
            // post-clip stability at high Hermite cutoffs
            let params = ModelParams::new(1.0, 1.0, 1).unwrap();
            let drift = preset_by_name("cosine-gradient").unwrap();
            for (nf, nh) in [(24, 24), (32, 32), (32, 48), (32, 64), (16, 96), (32, 96)] {
                let t0 = Instant::now();
                match run_pipeline(&drift, &params, nf, nh) {
                    Ok(run) => println!(
                        "({nf},{nh}) K2 = {:.16e}  res {:.2e}  [{:?}]",
                        run.diffusivity.matrix[0],
                        run.cell.residuals.iter().cloned().fold(0.0f64, f64::max),
                        t0.elapsed()
                    ),
                    Err(e) => println!("({nf},{nh}) ERR {e}"),
                }
            }
        }
        "double" => {
            // true doubling differences for the chosen c3 ladders
            for (name, tau, sigma, nf, nh) in [
                ("flat", 1.0f64, 1.0f64, 8usize, 8usize),
                ("cosine-gradient", 1.0, 1.0, 16, 96),
                ("two-mode-nongradient", 0.4, 1.1, 16, 48),
            ] {
                let params = ModelParams::new(tau, sigma, 1).unwrap();
                let drift = preset_by_name(name).unwrap();
                let t0 = Instant::now();
                let a = run_pipeline(&drift, &params, nf, nh);
                let b = run_pipeline(&drift, &params, 2 * nf, 2 * nh);
                match (a, b) {
                    (Ok(ra), Ok(rb)) => println!(
                        "tau {tau} sig {sigma} ({nf},{nh})->({},{}) d = {:.3e}  K2 {:.12e} [{:?}]",
                        2 * nf,
                        2 * nh,
                        (ra.diffusivity.matrix[0] - rb.diffusivity.matrix[0]).abs(),
                        rb.diffusivity.matrix[0],
                        t0.elapsed()
                    ),
                    (x, y) => println!(
                        "tau {tau} sig {sigma}: {} / {}",
                        x.err().map(|e| e.to_string()).unwrap_or("ok".into()),
                        y.err().map(|e| e.to_string()).unwrap_or("ok".into())
                    ),
                }
            }
        }
        "herm" => {
            // Hermite tail at fixed Fourier cutoff, several parameter sets
            for (tau, sigma) in [(1.0f64, 1.0f64), (0.3, 1.5), (0.5, 1.4)] {
                let params = ModelParams::new(tau, sigma, 1).unwrap();
                let drift = preset_by_name("cosine-gradient").unwrap();
                let mut prev: Option<f64> = None;
                for nh in [24usize, 32, 48, 64, 96, 128] {
                    match run_pipeline(&drift, &params, 16, nh) {
                        Ok(run) => {
                            let k2 = run.diffusivity.matrix[0];
                            let d = prev.map(|p| (k2 - p).abs());
                            println!(
                                "tau {tau} sig {sigma} (16,{nh}) K2 {k2:.14e}  step {:?}",
                                d.map(|x| format!("{x:.2e}"))
                            );
                            prev = Some(k2);
                        }
                        Err(e) => println!("tau {tau} sig {sigma} (16,{nh}) ERR {e}"),
                    }
                }
            }
        }
        "cellprof" => {
            let params = ModelParams::new(0.4, 1.1, 1).unwrap();
            let drift = preset_by_name("two-mode-nongradient").unwrap();
            for nh in [16usize, 32, 48, 64] {
                match run_pipeline(&drift, &params, 16, nh) {
                    Ok(run) => {
                        let phi = &run.cell.phi[0];
                        let basis = phi.basis();
                        let mut by_level = vec![0.0f64; nh + 1];
                        for (ar, alpha) in basis.hermite_indices().iter().enumerate() {
                            let deg: u32 = alpha.iter().sum();
                            for kr in 0..basis.n_fourier() {
                                let v = phi.coeffs()[basis.flat(kr, ar)].norm();
                                if v > by_level[deg as usize] {
                                    by_level[deg as usize] = v;
                                }
                            }
                        }
                        let head: Vec<String> =
                            by_level.iter().step_by(nh / 8).map(|v| format!("{v:.1e}")).collect();
                        println!(
                            "(16,{nh}) |phi| {:.3e}  levels(every {}): {}",
                            phi.norm(),
                            nh / 8,
                            head.join(" ")
                        );
                    }
                    Err(e) => println!("(16,{nh}) ERR {e}"),
                }
            }
            // gradient comparison
            let params = ModelParams::new(1.0, 1.0, 1).unwrap();
            let drift = preset_by_name("cosine-gradient").unwrap();
            for nh in [48usize, 96] {
                match run_pipeline(&drift, &params, 16, nh) {
                    Ok(run) => {
                        let phi = &run.cell.phi[0];
                        let basis = phi.basis();
                        let mut by_level = vec![0.0f64; nh + 1];
                        for (ar, alpha) in basis.hermite_indices().iter().enumerate() {
                            let deg: u32 = alpha.iter().sum();
                            for kr in 0..basis.n_fourier() {
                                let v = phi.coeffs()[basis.flat(kr, ar)].norm();
                                if v > by_level[deg as usize] {
                                    by_level[deg as usize] = v;
                                }
                            }
                        }
                        let head: Vec<String> =
                            by_level.iter().step_by(nh / 8).map(|v| format!("{v:.1e}")).collect();
                        println!(
                            "grad (16,{nh}) |phi| {:.3e}  levels: {}",
                            phi.norm(),
                            head.join(" ")
                        );
                    }
                    Err(e) => println!("grad (16,{nh}) ERR {e}"),
                }
            }
        }
        "nodes" => {
            use homog_core::spectral::{
                assemble_generator, invariant_density, mean_drift, solve_cell_problem, Basis,
                QuadratureRule,
            };
            let params = ModelParams::new(0.4, 1.1, 1).unwrap();
            let drift = preset_by_name("two-mode-nongradient").unwrap();
            let basis = Basis::new(&params, 16, 96).unwrap();
            let op = assemble_generator(&drift, &params, &basis).unwrap();
            let density = invariant_density(&op).unwrap();
            let v_bar = mean_drift(&density, &drift, &params).unwrap();
            let cell = solve_cell_problem(&op, &density, &v_bar, &params).unwrap();
            let g = &density.g;
            let rule = QuadratureRule::for_triple_products(g.basis());
            let gv = rule.eval(g);
            let dphi = cell.phi[0].diff_y(0);
            let fv = rule.eval(&dphi);
            // per-z profile: max over x of |w·f²·g| and |f|, |g|
            let m = rule.xs[0].len();
            let q = rule.zs[0].len();
            println!("m {m} q {q} zmax {:.2}", rule.zs[0][q - 1]);
            for qi in (0..q).step_by(q / 12) {
                let z = rule.zs[0][qi];
                let mut term: f64 = 0.0;
                let mut fmax: f64 = 0.0;
                let mut gmax: f64 = 0.0;
                for xi in 0..m {
                    let p = xi * q + qi;
                    let t = (rule.weights[p] * fv[p] * fv[p] * gv[p]).norm();
                    term = term.max(t);
                    fmax = fmax.max(fv[p].norm());
                    gmax = gmax.max(gv[p].norm());
                }
                println!("z {z:+.2}  |f| {fmax:.2e}  |g| {gmax:.2e}  |w f f g| {term:.2e}");
            }
        }
        "ladder" => {
            // what truncation_study reports on the cosine preset
            let params = ModelParams::new(1.0, 1.0, 1).unwrap();
            let drift = preset_by_name("cosine-gradient").unwrap();
            let study = truncation_study(
                &drift,
                &params,
                &[(4, 4), (8, 8), (16, 16), (32, 32)],
            );
            for row in &study.rows {
                println!(
                    "({},{}) k2 {:?} cauchy {:?} err {:?}",
                    row.n_fourier, row.n_hermite, row.k_squared.as_ref().map(|k| k[0]),
                    row.cauchy_diff, row.error
                );
            }
            println!("stagnation: {}", study.stagnation);
        }
        _ => eprintln!("usage: probe fixture|smol|twomode|ladder"),
    }
}
