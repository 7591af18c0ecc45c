//! Deterministic CSV/JSON artifact writers.
//!
//! Every artifact opens with a reproducibility header carrying the resolved
//! run configuration and the master seed, so a reader can re-create the run
//! from the file alone.  Writers are pure functions of their inputs — no
//! timestamps, hostnames, or locale formatting — which is what makes the
//! byte-identical-replay guarantee testable.
//!
//! Floats are printed as `{:.16e}`: 17 significant digits, enough to
//! round-trip every f64 exactly.

use crate::error::Result;
use crate::estimator::RateStudyResult;
use crate::integrator::EnsembleResult;
use crate::spectral::{CoefficientField, DiffusivityResult, TruncationStudy};
use serde_json::json;
use std::io::Write;

/// Header fields stamped on every artifact.
#[derive(Debug, Clone, Copy)]
pub struct Reproducibility<'a> {
    /// short artifact name, e.g. `"ensemble"`
    pub artifact: &'a str,
    /// the fully resolved run configuration as one-line JSON
    pub config_json: &'a str,
    /// master seed every stream in the run derived from
    pub seed: u64,
}

impl Reproducibility<'_> {
    fn write_csv_header<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# artifact: {}", self.artifact)?;
        writeln!(w, "# schema: 1")?;
        writeln!(w, "# generator: homog-core {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# config: {}", self.config_json)?;
        Ok(())
    }

    /// The same header material as a JSON object to merge into artifacts.
    fn json_fields(&self) -> serde_json::Value {
        let config: serde_json::Value =
            serde_json::from_str(self.config_json).unwrap_or(serde_json::Value::Null);
        json!({
            "schema": 1,
            "artifact": self.artifact,
            "generator": format!("homog-core {}", env!("CARGO_PKG_VERSION")),
            "seed": self.seed,
            "config": config,
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-record summary of an ensemble: time, displacement covariance entries
/// (row-major), and the exponential velocity moment.
pub fn ensemble_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    e: &EnsembleResult,
) -> Result<()> {
    meta.write_csv_header(w)?;
    let n = e.n;
    let mut cols = vec!["t".to_string()];
    for a in 0..n {
        for b in 0..n {
            cols.push(format!("cov_{a}{b}"));
        }
    }
    cols.push("moment".to_string());
    writeln!(w, "{}", cols.join(","))?;
    for r in 0..e.records {
        let mut row = vec![fmt(e.times[r])];
        row.extend(e.msd_at(r).iter().map(|&v| fmt(v)));
        row.push(fmt(e.moment_track[r]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// One row per path: the rescaled displacement at the final record.
pub fn endpoints_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    e: &EnsembleResult,
) -> Result<()> {
    meta.write_csv_header(w)?;
    let mut cols = vec!["path".to_string()];
    cols.extend((0..e.n).map(|j| format!("x_{j}")));
    writeln!(w, "{}", cols.join(","))?;
    for p in 0..e.path_count {
        let mut row = vec![p.to_string()];
        row.extend(e.endpoint_of(p).iter().map(|&v| fmt(v)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// The rate study table: one row per ε with its distance and CI.
pub fn rate_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    r: &RateStudyResult,
) -> Result<()> {
    meta.write_csv_header(w)?;
    writeln!(w, "eps,distance,ci_lo,ci_hi,sample_size")?;
    for i in 0..r.eps_grid.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(r.eps_grid[i]),
            fmt(r.distances[i]),
            fmt(r.ci_lo[i]),
            fmt(r.ci_hi[i]),
            r.sample_sizes[i]
        )?;
    }
    Ok(())
}

/// The rate verdict as JSON: fitted exponent, its CI, and the PASS flag.
pub fn rate_verdict_json<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    r: &RateStudyResult,
) -> Result<()> {
    let mut doc = meta.json_fields();
    let obj = doc.as_object_mut().expect("header is an object");
    obj.insert("alpha_hat".into(), json!(r.alpha_hat));
    obj.insert("ci".into(), json!([r.alpha_ci.0, r.alpha_ci.1]));
    obj.insert("log_c".into(), json!(r.log_c));
    obj.insert("pass".into(), json!(r.pass));
    obj.insert("notes".into(), json!(r.notes));
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

/// The spectral diffusivity result as JSON.
pub fn diffusivity_json<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    d: &DiffusivityResult,
    v_bar: &[f64],
) -> Result<()> {
    let n = d.n;
    let rows: Vec<Vec<f64>> =
        (0..n).map(|a| d.matrix[a * n..(a + 1) * n].to_vec()).collect();
    let mut doc = meta.json_fields();
    let obj = doc.as_object_mut().expect("header is an object");
    obj.insert("K2".into(), json!(rows));
    obj.insert("v_bar".into(), json!(v_bar));
    obj.insert("N_F".into(), json!(d.n_fourier));
    obj.insert("N_H".into(), json!(d.n_hermite));
    obj.insert(
        "residual".into(),
        json!(d.cell_residuals.iter().copied().fold(0.0f64, f64::max)),
    );
    obj.insert("eigenvalues".into(), json!(d.eigenvalues));
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

/// The cutoff-ladder table from a truncation study.
pub fn truncation_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    t: &TruncationStudy,
) -> Result<()> {
    meta.write_csv_header(w)?;
    writeln!(w, "n_fourier,n_hermite,k2_00,max_cell_residual,cauchy_diff,error")?;
    for row in &t.rows {
        let k2 = row
            .k_squared
            .as_ref()
            .map(|k| fmt(k[0]))
            .unwrap_or_default();
        let res = row.max_cell_residual.map(fmt).unwrap_or_default();
        let diff = row.cauchy_diff.map(fmt).unwrap_or_default();
        let err = row.error.as_deref().unwrap_or("").replace(',', ";");
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.n_fourier, row.n_hermite, k2, res, diff, err
        )?;
    }
    Ok(())
}

/// One τ-ladder row for the overdamped-limit sweep.
#[derive(Debug, Clone)]
pub struct TauSweepRow {
    pub tau: f64,
    /// spectral K² (scalar: the sweep is 1-D)
    pub k_squared: f64,
    /// overdamped reference σ²/(Ẑ₊Ẑ₋)
    pub smoluchowski: f64,
    /// |K²/K²_smol − 1|
    pub relative_gap: f64,
}

/// The τ → 0 sweep against the Smoluchowski reference.
pub fn tau_sweep_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    rows: &[TauSweepRow],
) -> Result<()> {
    meta.write_csv_header(w)?;
    writeln!(w, "tau,k2,smoluchowski,relative_gap")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(r.tau),
            fmt(r.k_squared),
            fmt(r.smoluchowski),
            fmt(r.relative_gap)
        )?;
    }
    Ok(())
}

/// Full coefficient dump of a spectral field: one row per basis element,
/// Fourier multi-index first, then Hermite multi-index, then re/im.
pub fn field_csv<W: Write>(
    w: &mut W,
    meta: &Reproducibility,
    f: &CoefficientField,
) -> Result<()> {
    meta.write_csv_header(w)?;
    let b = f.basis();
    let n = b.dim();
    let mut cols = Vec::with_capacity(2 * n + 2);
    cols.extend((0..n).map(|j| format!("k_{j}")));
    cols.extend((0..n).map(|j| format!("alpha_{j}")));
    cols.push("re".into());
    cols.push("im".into());
    writeln!(w, "{}", cols.join(","))?;
    let herm = b.hermite_indices();
    for k_rank in 0..b.n_fourier() {
        let k = b.fourier_vec(k_rank);
        for (a_rank, alpha) in herm.iter().enumerate() {
            let c = f.coeffs()[b.flat(k_rank, a_rank)];
            let mut row: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            row.extend(alpha.iter().map(|v| v.to_string()));
            row.push(fmt(c.re));
            row.push(fmt(c.im));
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::test_support::synthetic_brownian;
    use crate::model::{preset_flat, ModelParams};
    use crate::spectral::run_pipeline;

    fn meta() -> Reproducibility<'static> {
        Reproducibility {
            artifact: "test",
            config_json: r#"{"model":"flat","seed":42}"#,
            seed: 42,
        }
    }

    #[test]
    fn csv_headers_carry_the_run_identity() {
        let e = synthetic_brownian(1, 120, 4, 1.0, &[1.0], 7);
        let mut buf = Vec::new();
        ensemble_csv(&mut buf, &meta(), &e).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# artifact: test\n# schema: 1\n"));
        assert!(text.contains("# seed: 42\n"));
        assert!(text.contains(r#"# config: {"model":"flat","seed":42}"#));
        assert!(text.contains("t,cov_00,moment"));
        // 5 header lines + 1 column line + one row per record
        assert_eq!(text.lines().count(), 6 + e.records);
        // full 17-significant-digit mantissas
        assert!(text.contains("e0") || text.contains("e-"));
        let data_line = text.lines().nth(7).unwrap();
        let first = data_line.split(',').next().unwrap();
        let mantissa = first.split('e').next().unwrap();
        assert_eq!(mantissa.trim_start_matches('-').replace('.', "").len(), 17);
    }

    #[test]
    fn writers_are_deterministic() {
        let e = synthetic_brownian(2, 150, 5, 2.0, &[1.0, 0.0, 0.3, 0.9], 3);
        let mut a = Vec::new();
        let mut b = Vec::new();
        ensemble_csv(&mut a, &meta(), &e).unwrap();
        ensemble_csv(&mut b, &meta(), &e).unwrap();
        assert_eq!(a, b);
        a.clear();
        b.clear();
        endpoints_csv(&mut a, &meta(), &e).unwrap();
        endpoints_csv(&mut b, &meta(), &e).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("path,x_0,x_1"));
        assert_eq!(text.lines().count(), 6 + e.path_count);
    }

    #[test]
    fn rate_artifacts_round_trip() {
        let eps: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
        let d: Vec<f64> = eps.iter().map(|e| 2.0 * e.powf(0.5)).collect();
        let cis: Vec<(f64, f64)> = d.iter().map(|&x| (x, x)).collect();
        let r = crate::estimator::rate_fit(&eps, &d, &cis, &[100; 4], 0).unwrap();

        let mut buf = Vec::new();
        rate_csv(&mut buf, &meta(), &r).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("eps,distance,ci_lo,ci_hi,sample_size"));
        assert_eq!(text.lines().count(), 6 + 4);

        let mut buf = Vec::new();
        rate_verdict_json(&mut buf, &meta(), &r).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert!((doc["alpha_hat"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(doc["pass"], serde_json::Value::Bool(true));
        assert_eq!(doc["seed"], serde_json::json!(42));
        assert_eq!(doc["config"]["model"], serde_json::json!("flat"));
        assert!(doc["ci"].as_array().unwrap().len() == 2);
    }

    #[test]
    fn diffusivity_json_has_the_contract_keys() {
        let params = ModelParams::new(0.7, 1.3, 1).unwrap();
        let pipe = run_pipeline(&preset_flat(), &params, 2, 6).unwrap();
        let mut buf = Vec::new();
        diffusivity_json(&mut buf, &meta(), &pipe.diffusivity, &pipe.v_bar).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["K2", "v_bar", "N_F", "N_H", "residual", "seed", "config"] {
            assert!(doc.get(key).is_some(), "missing key {key}");
        }
        let k2 = doc["K2"][0][0].as_f64().unwrap();
        let sigma2 = 1.3 * 1.3;
        assert!((k2 - sigma2).abs() < 1e-12, "{k2} vs {sigma2}");
    }

    #[test]
    fn field_dump_enumerates_the_whole_basis() {
        let params = ModelParams::new(0.7, 1.3, 1).unwrap();
        let pipe = run_pipeline(&preset_flat(), &params, 2, 6).unwrap();
        let f = &pipe.cell.phi[0];
        let mut buf = Vec::new();
        field_csv(&mut buf, &meta(), f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let b = f.basis();
        assert_eq!(text.lines().count(), 6 + b.n_fourier() * b.n_hermite());
        assert!(text.contains("k_0,alpha_0,re,im"));
    }
}
