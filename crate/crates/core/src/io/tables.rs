//! CSV tables of post-processing results.

use std::io::Write;

use crate::error::{Error, Result};
use crate::posterior::{MwtpDistribution, MwtpRecord, PosteriorSummary, RegressionResult};
use crate::sampler::diagnostics::ParameterDiagnostic;
use crate::scenario::ShareTable;

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn fail(e: impl std::fmt::Display) -> Error {
    Error::Numeric(format!("failed to write table: {e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(fail)?.flush().map_err(fail)
}

/// `parameter,mean,sd,t,lower_95,upper_95,degenerate` followed by fit rows.
pub fn write_summary<W: Write>(summary: &PosteriorSummary<f64>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["parameter", "mean", "sd", "t", "lower_95", "upper_95", "degenerate"]).map_err(fail)?;
    for p in &summary.parameters {
        w.write_record([
            p.name.clone(),
            p.mean.to_string(),
            p.sd.to_string(),
            opt(p.t_stat),
            p.lower_95.to_string(),
            p.upper_95.to_string(),
            (p.degenerate as u8).to_string(),
        ])
        .map_err(fail)?;
    }
    finish(w)
}

/// `statistic,value` rows for the model-level fit.
pub fn write_fit<W: Write>(summary: &PosteriorSummary<f64>, out: W) -> Result<()> {
    let f = &summary.fit;
    let mut w = csv_writer(out);
    w.write_record(["statistic", "value"]).map_err(fail)?;
    for (k, v) in [
        ("loglik_null", f.loglik_null.to_string()),
        ("loglik_final", f.loglik_final.to_string()),
        ("n_params", f.n_params.to_string()),
        ("rho_squared", f.rho_squared.to_string()),
        ("adjusted_rho_squared", f.adjusted_rho_squared.to_string()),
    ] {
        w.write_record([k, v.as_str()]).map_err(fail)?;
    }
    finish(w)
}

pub fn write_diagnostics<W: Write>(diagnostics: &[ParameterDiagnostic], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["parameter", "rhat", "ess", "degenerate", "not_converged"]).map_err(fail)?;
    for d in diagnostics {
        w.write_record([
            d.name.clone(),
            opt(d.rhat),
            opt(d.ess),
            (d.degenerate as u8).to_string(),
            (d.not_converged as u8).to_string(),
        ])
        .map_err(fail)?;
    }
    finish(w)
}

/// One row per table line (`observed`, `baseline`, then a share and a delta
/// row per scenario), one column per alternative.
pub fn write_share_table<W: Write>(table: &ShareTable<f64>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["row".to_string(), "kind".to_string()];
    header.extend(table.alternatives.iter().cloned());
    w.write_record(&header).map_err(fail)?;
    let mut row = |name: &str, kind: &str, values: &[f64]| {
        let mut r = vec![name.to_string(), kind.to_string()];
        r.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&r).map_err(fail)
    };
    row("observed", "share", &table.observed)?;
    row("baseline", "share", &table.baseline)?;
    for s in &table.scenarios {
        row(&s.name, "share", &s.shares)?;
        row(&s.name, "delta", &s.delta)?;
    }
    finish(w)
}

pub fn write_mwtp_records<W: Write>(records: &[MwtpRecord<f64>], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["individual_id", "attribute", "mwtp", "ratio_sd", "unstable"]).map_err(fail)?;
    for r in records {
        w.write_record([
            r.individual_id.clone(),
            r.attribute.clone(),
            opt(r.value),
            opt(r.ratio_sd),
            (r.unstable as u8).to_string(),
        ])
        .map_err(fail)?;
    }
    finish(w)
}

pub fn write_mwtp_distribution<W: Write>(d: &MwtpDistribution<f64>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["attribute", "n", "n_flagged", "mean", "sd", "median", "min", "max"]).map_err(fail)?;
    w.write_record([
        d.attribute.clone(),
        d.n.to_string(),
        d.n_flagged.to_string(),
        d.mean.to_string(),
        d.sd.to_string(),
        d.median.to_string(),
        d.min.to_string(),
        d.max.to_string(),
    ])
    .map_err(fail)?;
    finish(w)
}

/// Coefficient rows followed by `r_squared`, `residual_variance`, `n` and flags.
pub fn write_regression<W: Write>(r: &RegressionResult<f64>, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["term", "estimate", "std_error", "p_value"]).map_err(fail)?;
    for c in std::iter::once(&r.intercept).chain(&r.coefficients) {
        w.write_record([c.name.clone(), c.estimate.to_string(), opt(c.std_error), opt(c.p_value)]).map_err(fail)?;
    }
    for (k, v) in [
        ("r_squared", r.r_squared.to_string()),
        ("residual_variance", r.residual_variance.to_string()),
        ("n", r.n.to_string()),
        ("ridge_applied", (r.ridge_applied as u8).to_string()),
        ("zero_variance_response", (r.zero_variance_response as u8).to_string()),
    ] {
        w.write_record([k, v.as_str(), "", ""]).map_err(fail)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioShares;

    #[test]
    fn share_table_layout() {
        let t = ShareTable {
            alternatives: vec!["a".into(), "b".into()],
            observed: vec![40.0, 60.0],
            baseline: vec![42.5, 57.5],
            scenarios: vec![ScenarioShares { name: "s".into(), shares: vec![40.0, 60.0], delta: vec![-2.5, 2.5] }],
        };
        let mut buf = Vec::new();
        write_share_table(&t, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row,kind,a,b\nobserved,share,40,60\nbaseline,share,42.5,57.5\ns,share,40,60\ns,delta,-2.5,2.5\n"
        );
    }
}
