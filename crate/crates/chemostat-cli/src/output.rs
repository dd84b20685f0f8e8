//! CSV and summary artifacts.
//!
//! Time series go to CSV with the fixed column order `step, t, D,
//! f_boundary, y, w, ratio_min, ratio_max`, a mandatory header row, and all
//! floating values printed with 17 significant digits so identical runs
//! produce byte-identical files. The summary is a small JSON record of the
//! run's end state plus a decay rate fitted on the sampled deviation tail.

use std::fs;
use std::path::{Path, PathBuf};

use chemostat_core::metrics::fit_decay_rate;
use chemostat_core::pde_sim::{RunOutput, TimeSeries};
use chemostat_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 8] =
    ["step", "t", "D", "f_boundary", "y", "w", "ratio_min", "ratio_max"];

/// 17 significant digits: enough to reproduce the f64 bit pattern exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes every `stride`-th record (step 0 always included).
pub fn write_csv(path: &Path, series: &TimeSeries, stride: usize) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(CSV_HEADER)?;
    for r in series.records.iter().filter(|r| r.step % stride == 0) {
        wtr.write_record(&[
            r.step.to_string(),
            fmt17(r.t),
            fmt17(r.d),
            fmt17(r.f_boundary),
            fmt17(r.y),
            fmt17(r.w),
            fmt17(r.ratio_min),
            fmt17(r.ratio_max),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// End-state record of one run. `fitted_decay_rate` is a least-squares
/// slope of `ln w` over the sampled tail (`t ≥ t_end/2`); it is null when
/// the deviation has already collapsed below the fit floor, which is the
/// expected outcome for converged closed-loop runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_d: f64,
    pub final_f_boundary: f64,
    pub final_y: f64,
    pub final_w: f64,
    pub fitted_decay_rate: Option<f64>,
    pub max_abs_log_ratio: f64,
}

pub fn summarize(out: &RunOutput, t_end: f64) -> RunSummary {
    let series = &out.series;
    let last = series.records.last().expect("a run records step 0");
    let samples: Vec<(f64, f64)> = series
        .records
        .iter()
        .step_by(series.per)
        .map(|r| (r.t, r.w))
        .collect();
    let fitted_decay_rate = match fit_decay_rate(&samples, t_end / 2.0) {
        Ok(rate) => Some(rate),
        Err(Error::DegenerateFit { .. }) => None,
        Err(_) => None,
    };
    RunSummary {
        steps: last.step,
        final_d: last.d,
        final_f_boundary: last.f_boundary,
        final_y: last.y,
        final_w: last.w,
        fitted_decay_rate,
        max_abs_log_ratio: series.records.iter().map(|r| r.w).fold(0.0, f64::max),
    }
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, format!("{text}\n"))?;
    Ok(text)
}

/// Output root: the `--out` flag, else `CHEMOSTAT_OUT_DIR`, else the
/// current directory.
pub fn out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CHEMOSTAT_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Column-wise tolerance comparison of a candidate CSV against a golden
/// one. A cell passes if the strings match exactly or both parse as floats
/// with `|candidate − golden| ≤ tol_abs + tol_rel·|golden|`. The error
/// describes the first divergence (1-based data rows).
pub fn compare_csv(candidate: &Path, golden: &Path, tol_rel: f64, tol_abs: f64) -> Result<()> {
    let read = |path: &Path| -> Result<(csv::StringRecord, Vec<csv::StringRecord>)> {
        let mut rdr = csv::Reader::from_path(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let header = rdr
            .headers()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
            .clone();
        let rows = rdr
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((header, rows))
    };
    let (header_c, rows_c) = read(candidate)?;
    let (header_g, rows_g) = read(golden)?;
    if header_c != header_g {
        return Err(CliError::Divergence(format!(
            "headers differ: candidate {:?}, golden {:?}",
            header_c, header_g
        )));
    }
    if rows_c.len() != rows_g.len() {
        return Err(CliError::Divergence(format!(
            "row counts differ: candidate {}, golden {}",
            rows_c.len(),
            rows_g.len()
        )));
    }
    for (i, (rc, rg)) in rows_c.iter().zip(&rows_g).enumerate() {
        for (col, name) in header_g.iter().enumerate() {
            let (a, b) = (rc.get(col).unwrap_or(""), rg.get(col).unwrap_or(""));
            if a == b {
                continue;
            }
            let (fa, fb) = match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(fa), Ok(fb)) => (fa, fb),
                _ => {
                    return Err(CliError::Divergence(format!(
                        "first divergence at data row {}, column {name}: \
                         non-numeric mismatch (candidate {a:?}, golden {b:?})",
                        i + 1
                    )));
                }
            };
            let tol = tol_abs + tol_rel * fb.abs();
            if !((fa - fb).abs() <= tol) {
                return Err(CliError::Divergence(format!(
                    "first divergence at data row {}, column {name}: \
                     candidate {fa:e}, golden {fb:e}, allowed {tol:e}",
                    i + 1
                )));
            }
        }
    }
    Ok(())
}
