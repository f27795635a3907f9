//! CSV and JSON artifacts.
//!
//! Every file starts with the resolved configuration: CSV files carry it on a
//! leading `# config=<json>` line, JSON reports under the `config` key.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::harness::ConvergenceReport;
use crate::model::PhaseState;

pub const ERRORS_CSV_HEADER: &str = "model,scheme,dt,mean_error,std_error,n_paths_used,n_excluded";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Leading comment line holding `config` as compact JSON.
pub fn config_line<T: Serialize>(config: &T) -> Result<String> {
    Ok(format!("# config={}\n", serde_json::to_string(config)?))
}

/// One row per `(scheme, dt)`; empty fields for unreliable cells and absent
/// standard errors.
pub fn write_errors_csv<W: Write>(report: &ConvergenceReport, mut out: W) -> Result<()> {
    let mut s = config_line(&report.config)?;
    s.push_str(ERRORS_CSV_HEADER);
    s.push('\n');
    for r in &report.results {
        for c in &r.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                report.config.model.name,
                r.scheme,
                c.dt,
                opt(c.mean_error),
                opt(c.std_error),
                c.n_paths_used,
                c.n_excluded
            );
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &ConvergenceReport, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Write `errors.csv` and `report.json` into `dir`, creating it if needed.
pub fn write_outputs(report: &ConvergenceReport, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv = dir.join("errors.csv");
    let json = dir.join("report.json");
    let mut buf = Vec::new();
    write_errors_csv(report, &mut buf)?;
    fs::write(&csv, buf)?;
    let mut buf = Vec::new();
    write_report_json(report, &mut buf)?;
    fs::write(&json, buf)?;
    Ok((csv, json))
}

/// Time series `t, x0.., v0..` with an optional trailing `energy_drift` column.
pub fn write_trajectory_csv<W: Write, T: Serialize>(
    config: &T,
    dt: f64,
    states: &[PhaseState],
    energy: Option<&[f64]>,
    mut out: W,
) -> Result<()> {
    let mut s = config_line(config)?;
    let n = states.first().map_or(0, |p| p.dim());
    s.push('t');
    for i in 0..n {
        let _ = write!(s, ",x{i}");
    }
    for i in 0..n {
        let _ = write!(s, ",v{i}");
    }
    if energy.is_some() {
        s.push_str(",energy_drift");
    }
    s.push('\n');
    for (k, p) in states.iter().enumerate() {
        let _ = write!(s, "{}", k as f64 * dt);
        for x in p.x.iter().chain(p.v.iter()) {
            let _ = write!(s, ",{x}");
        }
        if let Some(e) = energy {
            let _ = write!(s, ",{}", e[k]);
        }
        s.push('\n');
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Fixed-width table of fitted slopes.
pub fn slope_table(report: &ConvergenceReport) -> String {
    let mut s = format!("{:<22} {:>8} {:>8} {:>9}\n", "scheme", "slope", "stderr", "expected");
    for r in &report.results {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let _ = writeln!(
            s,
            "{:<22} {:>8} {:>8} {:>9.1}",
            r.scheme.name(),
            f(r.slope),
            f(r.slope_stderr),
            r.scheme.expected_order()
        );
    }
    s
}
