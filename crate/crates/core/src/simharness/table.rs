use std::fmt::Write as _;

use crate::error::{EmaxError, Result};

use super::{ParamMetrics, SimMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

fn csv_err(e: impl std::fmt::Display) -> EmaxError {
    EmaxError::InvalidData(format!("table csv: {e}"))
}

/// Per-parameter table: Estimate, MBE, MSE, Est.SE, CP, Est.Length.
pub fn emit_table(metrics: &SimMetrics, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record([
                "estimator", "parameter", "truth", "estimate", "mbe", "mse", "est_se", "cp", "est_length", "n_used",
                "n_used_se",
            ])
            .expect("in-memory write");
            for row in &metrics.rows {
                w.serialize(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        TableFormat::Text => {
            let mut out = format!(
                "{:<10} {:<9} {:>9} {:>9} {:>9} {:>9} {:>7} {:>10} {:>6}\n",
                "Method", "Param", "Estimate", "MBE", "MSE", "Est.SE", "CP", "Est.Length", "n"
            );
            for r in &metrics.rows {
                let _ = writeln!(
                    out,
                    "{:<10} {:<9} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>7.3} {:>10.3} {:>6}",
                    r.estimator.label(),
                    r.parameter,
                    r.mean_estimate,
                    r.mbe,
                    r.mse,
                    r.mean_se,
                    r.coverage,
                    r.mean_ci_length,
                    r.n_used
                );
            }
            out
        }
    }
}

/// Reads back a CSV produced by [`emit_table`].
pub fn parse_table(text: &str) -> Result<Vec<ParamMetrics>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    rdr.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Fail and unstable percentages per estimator.
pub fn emit_rates(metrics: &SimMetrics, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut out = String::from("estimator,n_reps,fail_pct,unstable_pct\n");
            for r in &metrics.rates {
                let _ = writeln!(out, "{},{},{},{}", r.estimator.as_str(), r.n_reps, r.fail_pct, r.unstable_pct);
            }
            out
        }
        TableFormat::Text => {
            let mut out = format!("{:<10} {:>8} {:>10} {:>12}\n", "Method", "Reps", "Fail (%)", "Unstable (%)");
            for r in &metrics.rates {
                let _ = writeln!(out, "{:<10} {:>8} {:>10.1} {:>12.1}", r.estimator.label(), r.n_reps, r.fail_pct, r.unstable_pct);
            }
            out
        }
    }
}
