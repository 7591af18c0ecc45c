//! Slow-but-trusted finite-difference application of the generator.
//!
//! The generator of the kinetic process is
//!
//! ```text
//!   L = (1/√τ)(y·∇_x + v(x)·∇_y) + (1/τ)(−y·∇_y + (σ²/2)·Δ_y)
//! ```
//!
//! This module evaluates `(L f)(x, y)` for an arbitrary callable `f` with
//! central differences of step `h`, accurate to `O(h²)`. It exists purely to
//! validate the spectral machinery against something with no shared code —
//! never use it in a hot path.

use crate::model::{DriftSpec, ModelParams};

/// Apply the generator to `f` at `(x, y)` by central finite differences.
///
/// `f` must be twice differentiable near the point and accept the torus
/// coordinate without wrapping (periodic callables are evaluated at `x ± h`
/// directly).
pub fn generator_apply_fd(
    f: &dyn Fn(&[f64], &[f64]) -> f64,
    drift: &DriftSpec,
    params: &ModelParams,
    x: &[f64],
    y: &[f64],
    h: f64,
) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = params.n;
    assert_eq!(x.len(), n);
    assert_eq!(y.len(), n);
    let v = drift.eval(x).expect("drift must evaluate cleanly");
    let sqrt_tau = params.tau.sqrt();
    let f0 = f(x, y);

    let mut acc = 0.0;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    for j in 0..n {
        xp[j] += h;
        xm[j] -= h;
        let dfx = (f(&xp, y) - f(&xm, y)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];

        yp[j] += h;
        ym[j] -= h;
        let fyp = f(x, &yp);
        let fym = f(x, &ym);
        let dfy = (fyp - fym) / (2.0 * h);
        let d2fy = (fyp - 2.0 * f0 + fym) / (h * h);
        yp[j] = y[j];
        ym[j] = y[j];

        acc += (y[j] * dfx + v[j] * dfy) / sqrt_tau;
        acc += (-y[j] * dfy + 0.5 * params.sigma * params.sigma * d2fy) / params.tau;
    }
    acc
}
