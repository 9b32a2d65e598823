//! CSV traces of monitored quantities.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{PcfError, Result};
use crate::flow::Trajectory;
use crate::functionals::TraceRecord;

/// Fixed leading columns, in order.
pub const BASE_COLUMNS: [&str; 14] = [
    "t",
    "dt",
    "sup_F",
    "inf_F",
    "sup_P",
    "entropy",
    "j_neg_ric",
    "k_energy",
    "i_functional",
    "dissipation",
    "calabi_energy",
    "rho_min",
    "volume",
    "poisson_residual",
];

/// Column name of the PCF/NKRF density divergence in cross-check traces.
pub const DIVERGENCE_COLUMN: &str = "rho_divergence";

pub fn csv_header(p_list: &[f64], with_divergence: bool) -> String {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|c| c.to_string()).collect();
    for p in p_list {
        cols.push(format!("grad_F_Lp{p}"));
        cols.push(format!("trace0_Lp{p}"));
    }
    if with_divergence {
        cols.push(DIVERGENCE_COLUMN.to_string());
    }
    cols.join(",")
}

fn lookup(pairs: &[(f64, f64)], p: f64) -> f64 {
    pairs.iter().find(|(q, _)| *q == p).map_or(f64::NAN, |(_, v)| *v)
}

fn push_value(line: &mut String, v: f64) {
    if !line.is_empty() {
        line.push(',');
    }
    // 17 significant digits round-trip every f64
    let _ = write!(line, "{v:.16e}");
}

/// Renders records as CSV text with LF line endings.
pub fn csv_string(records: &[TraceRecord], p_list: &[f64], divergence: Option<&[f64]>) -> Result<String> {
    if records.is_empty() {
        return Err(PcfError::validation("trajectory", "no records to write"));
    }
    if let Some(d) = divergence {
        if d.len() != records.len() {
            return Err(PcfError::validation(
                "divergence",
                format!("{} values for {} records", d.len(), records.len()),
            ));
        }
    }
    let mut out = csv_header(p_list, divergence.is_some());
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        let mut line = String::new();
        for v in [
            r.time,
            r.dt,
            r.sup_f,
            r.inf_f,
            r.sup_p,
            r.entropy,
            r.j_neg_ric,
            r.k_energy,
            r.i_functional,
            r.dissipation,
            r.calabi_energy,
            r.rho_min,
            r.volume,
            r.poisson_residual,
        ] {
            push_value(&mut line, v);
        }
        for &p in p_list {
            push_value(&mut line, lookup(&r.lp_grad_f, p));
            push_value(&mut line, lookup(&r.lp_trace0, p));
        }
        if let Some(d) = divergence {
            push_value(&mut line, d[i]);
        }
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Writes the trajectory's records to `path`.
pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let text = csv_string(&traj.records, &traj.config.p_list, None)?;
    fs::write(path, text)?;
    Ok(())
}

/// Writes the trajectory's records with an extra divergence column.
pub fn emit_csv_with_divergence(traj: &Trajectory, divergence: &[f64], path: &Path) -> Result<()> {
    let text = csv_string(&traj.records, &traj.config.p_list, Some(divergence))?;
    fs::write(path, text)?;
    Ok(())
}
