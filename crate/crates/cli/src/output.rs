use std::fs;
use std::io::Write;
use std::path::Path;

use memloss::partitions::{default_fit_window, fit_log_log};
use memloss::tail::fmt_f64;
use memloss::PowerLawFit;
use serde_json::{json, Value};

use crate::CliError;

/// Write `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// CSV text from a header and rows of optional floats (empty cell for `None`).
pub fn csv(header: &str, rows: impl IntoIterator<Item = (String, Vec<Option<f64>>)>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for (first, rest) in rows {
        out.push_str(&first);
        for v in rest {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&fmt_f64(v));
            }
        }
        out.push('\n');
    }
    out
}

/// Parsed CSV: header columns and cells (the first column kept as text).
pub struct Table {
    pub header: Vec<String>,
    pub first: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn parse_csv(text: &str, name: &str) -> Result<Table, CliError> {
    let fmt = |line: usize, msg: String| CliError::Format(format!("{name}:{line}: {msg}"));
    let mut lines = text.split('\n');
    let header_line = lines.next().unwrap_or("");
    if header_line.trim().is_empty() {
        return Err(fmt(1, "empty file".into()));
    }
    let header: Vec<String> = header_line.split(',').map(str::to_string).collect();
    let mut first = Vec::new();
    let mut cells = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            return Err(fmt(i + 2, format!("expected {} columns, got {}", header.len(), cols.len())));
        }
        first.push(cols[0].to_string());
        let row = cols[1..]
            .iter()
            .map(|c| {
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|_| fmt(i + 2, format!("bad number '{c}'")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(fmt(2, "no data rows".into()));
    }
    Ok(Table { header, first, cells })
}

impl Table {
    /// First column as consecutive indices `0, 1, …`.
    fn indices(&self, name: &str) -> Result<(), CliError> {
        for (i, s) in self.first.iter().enumerate() {
            if s.parse::<usize>().ok() != Some(i) {
                return Err(CliError::Format(format!("{name}:{}: expected n = {i}, got '{s}'", i + 2)));
            }
        }
        Ok(())
    }

    fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.cells.iter().map(|r| r[j - 1]).collect()
    }
}

fn fit_json(fit: Result<PowerLawFit, String>, window: (usize, usize)) -> Value {
    match fit {
        Ok(f) => json!({
            "window": [window.0, window.1],
            "slope": f.slope,
            "slope_stderr": f.slope_stderr,
            "intercept": f.intercept,
            "r_squared": f.r_squared,
        }),
        Err(e) => json!({ "window": [window.0, window.1], "error": e }),
    }
}

/// Fit over `window`, using only positive values if `skip_zeros`.
fn fit_column(col: &[Option<f64>], window: (usize, usize), skip_zeros: bool) -> Result<PowerLawFit, String> {
    let (lo, hi) = window;
    if lo == 0 || lo >= hi || hi >= col.len() {
        return Err(format!("invalid fit window [{lo}, {hi}] for n_max = {}", col.len().saturating_sub(1)));
    }
    let mut pts = Vec::new();
    for (n, v) in col.iter().enumerate().take(hi + 1).skip(lo) {
        match v {
            Some(v) if *v > 0.0 => pts.push((n as f64, *v)),
            _ if skip_zeros => {}
            _ => return Err(format!("value at n = {n} is not positive")),
        }
    }
    fit_log_log(&pts).map_err(|e| e.to_string())
}

fn window(n_max: usize, default: (usize, usize), fit_min: Option<usize>, fit_max: Option<usize>) -> (usize, usize) {
    (fit_min.unwrap_or(default.0), fit_max.unwrap_or(default.1).min(n_max))
}

/// Summary of one CSV written by this tool, computed from its text alone.
pub fn summarize_text(text: &str, name: &str, fit_min: Option<usize>, fit_max: Option<usize>) -> Result<Value, CliError> {
    let t = parse_csv(text, name)?;
    let header = t.header.join(",");
    let n_max = t.cells.len().saturating_sub(1);
    let summary = match header.as_str() {
        "n,value,stderr" => {
            t.indices(name)?;
            let col = t.column(1);
            let w = window(n_max, default_fit_window(n_max), fit_min, fit_max);
            let mc = t.cells.iter().any(|r| r[1].is_some());
            json!({
                "file": name,
                "kind": "tails",
                "n_max": n_max,
                "monte_carlo": mc,
                "fit": fit_json(fit_column(&col, w, mc), w),
            })
        }
        "n,tv" => {
            t.indices(name)?;
            let col = t.column(1);
            let w = window(n_max, (10.min(n_max.saturating_sub(1)).max(1), n_max), fit_min, fit_max);
            json!({
                "file": name,
                "kind": "memloss",
                "n_max": n_max,
                "tv_final": col[n_max],
                "fit": fit_json(fit_column(&col, w, false), w),
            })
        }
        "n,mass" => {
            t.indices(name)?;
            let col: Vec<f64> = t.column(1).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let (mut floor, mut at) = (f64::INFINITY, 0usize);
            for (n, &v) in col.iter().enumerate().skip(2) {
                if v < floor {
                    floor = v;
                    at = n;
                }
            }
            let top = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            json!({ "file": name, "kind": "mixing", "n_max": n_max, "floor": floor, "floor_at": at, "max": top })
        }
        "n,p_dp,p_mc,stderr,ratio" => {
            t.indices(name)?;
            let dp = t.column(1);
            let mc = t.column(2);
            let ratio: Vec<f64> = t.column(4).into_iter().map(|v| v.unwrap_or(0.0)).collect();
            let w = window(n_max, default_fit_window(n_max), fit_min, fit_max);
            let (mut sup, mut arg) = (f64::NEG_INFINITY, 0usize);
            for (n, &r) in ratio.iter().enumerate().skip(1) {
                if r > sup {
                    sup = r;
                    arg = n;
                }
            }
            let has_mc = mc.iter().any(Option::is_some);
            json!({
                "file": name,
                "kind": "coupling",
                "n_max": n_max,
                "sup_ratio": sup,
                "argmax_n": arg,
                "plateau": arg <= n_max / 2,
                "fit_dp": fit_json(fit_column(&dp, w, false), w),
                "fit_mc": if has_mc { fit_json(fit_column(&mc, w, true), w) } else { Value::Null },
            })
        }
        "n,ratio,theta,theta_sup" => {
            t.indices(name)?;
            let ratio = t.column(1);
            let theta_sup = t.column(3);
            json!({
                "file": name,
                "kind": "frequency",
                "n_max": n_max,
                "ratio_final": ratio[n_max],
                "theta_sup_1": theta_sup.get(1).copied().flatten(),
            })
        }
        "x,density" => {
            let xs: Vec<f64> = t
                .first
                .iter()
                .enumerate()
                .map(|(i, s)| s.parse::<f64>().map_err(|_| CliError::Format(format!("{name}:{}: bad x '{s}'", i + 2))))
                .collect::<Result<_, _>>()?;
            let d: Vec<f64> = t.column(1).into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let h = if xs.len() > 1 { xs[1] - xs[0] } else { f64::NAN };
            json!({
                "file": name,
                "kind": "evolve",
                "cells": xs.len(),
                "mass": d.iter().sum::<f64>() * h,
                "min": d.iter().copied().fold(f64::INFINITY, f64::min),
                "max": d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        }
        other => return Err(CliError::Format(format!("{name}:1: unrecognized header '{other}'"))),
    };
    Ok(summary)
}

/// Slopes reported in a summary, for expectation gates.
pub fn slopes(summary: &Value) -> Vec<Option<f64>> {
    let get = |key: &str| summary.get(key).filter(|v| !v.is_null()).map(|f| f.get("slope").and_then(Value::as_f64));
    match summary.get("kind").and_then(Value::as_str) {
        Some("tails") if summary["monte_carlo"] == Value::Bool(true) => Vec::new(),
        Some("tails") | Some("memloss") => vec![get("fit").flatten()],
        Some("coupling") => vec![get("fit_dp").flatten()],
        _ => Vec::new(),
    }
}
