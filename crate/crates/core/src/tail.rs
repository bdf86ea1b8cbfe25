//! Tabulated functions of an integer argument: return-time tails, tails of
//! the coupling time, memory-loss curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a [`TailTable`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailLabel {
    /// `m_k(τ_k ≥ n)`.
    HK,
    /// Normalized Lebesgue measure of `{τ_k ≥ n}`.
    Lebesgue,
    /// A generic tail bound `r(n)`.
    R,
    /// `P(S ≥ n)`.
    STail,
    /// Running supremum `sup_{ℓ ≥ n} Θ_ℓ` over the tabulated range.
    Theta,
    /// Total variation distance after `n` steps.
    MemoryLoss,
    /// `((T_{k,k+n-1})_* m_k)(Y_{k+n})`; not monotone.
    MixingMass,
}

impl TailLabel {
    /// Whether the tabulated function must be nonincreasing.
    pub fn is_monotone(self) -> bool {
        !matches!(self, TailLabel::MixingMass)
    }
}

/// Slack allowed when validating monotonicity and the `[0, 1]` range.
pub const TABLE_TOL: f64 = 1e-9;

/// Values `t(0), t(1), …, t(n_max)` with optional standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub label: TailLabel,
    pub k: usize,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
}

impl TailTable {
    /// Build a table, checking the range and (for monotone labels) monotonicity.
    pub fn new(label: TailLabel, k: usize, values: Vec<f64>) -> Result<Self> {
        Self::validate(label, &values)?;
        Ok(TailTable { label, k, values, stderr: None })
    }

    /// Build a table with attached standard errors.
    pub fn with_stderr(label: TailLabel, k: usize, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if stderr.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values but {} standard errors",
                values.len(),
                stderr.len()
            )));
        }
        Self::validate(label, &values)?;
        Ok(TailTable { label, k, values, stderr: Some(stderr) })
    }

    fn validate(label: TailLabel, values: &[f64]) -> Result<()> {
        for (n, &v) in values.iter().enumerate() {
            if !(v >= -TABLE_TOL && v <= 1.0 + TABLE_TOL) {
                return Err(Error::Param(format!("table value {v} at n = {n} outside [0, 1]")));
            }
        }
        if label.is_monotone() {
            for (n, w) in values.windows(2).enumerate() {
                if w[1] > w[0] + TABLE_TOL {
                    return Err(Error::Param(format!(
                        "table increases at n = {}: {} -> {}",
                        n + 1,
                        w[0],
                        w[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    /// Largest tabulated argument.
    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `t(n)`, or a depth error past the end of the table.
    pub fn get(&self, n: usize) -> Result<f64> {
        self.values
            .get(n)
            .copied()
            .ok_or(Error::Depth { requested: n, available: self.n_max() })
    }
}

impl std::ops::Index<usize> for TailTable {
    type Output = f64;

    fn index(&self, n: usize) -> &f64 {
        &self.values[n]
    }
}

/// A float with 17 significant digits, independent of locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `n,value,stderr`; the stderr column is empty for exact tables.
pub fn tail_csv(t: &TailTable) -> String {
    let mut out = String::from("n,value,stderr\n");
    for (n, &v) in t.values().iter().enumerate() {
        let se = t.stderr().map(|s| fmt_f64(s[n])).unwrap_or_default();
        out.push_str(&format!("{n},{},{se}\n", fmt_f64(v)));
    }
    out
}

/// Values and optional standard errors from a CSV written by [`tail_csv`].
pub fn parse_tail_csv(text: &str) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let mut lines = text.lines();
    match lines.next() {
        Some("n,value,stderr") => {}
        Some(h) => return Err(Error::Format(format!("line 1: expected header 'n,value,stderr', got '{h}'"))),
        None => return Err(Error::Format("empty tails file".into())),
    }
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Format(format!("line {lineno}: expected 3 columns, got {}", cols.len())));
        }
        let n: usize = cols[0].parse().map_err(|_| Error::Format(format!("line {lineno}: bad index '{}'", cols[0])))?;
        if n != values.len() {
            return Err(Error::Format(format!("line {lineno}: expected n = {}, got {n}", values.len())));
        }
        let v: f64 = cols[1].parse().map_err(|_| Error::Format(format!("line {lineno}: bad value '{}'", cols[1])))?;
        values.push(v);
        if !cols[2].is_empty() {
            let se: f64 = cols[2].parse().map_err(|_| Error::Format(format!("line {lineno}: bad stderr '{}'", cols[2])))?;
            stderr.push(se);
        }
    }
    if values.is_empty() {
        return Err(Error::Format("tails file has no rows".into()));
    }
    let stderr = match stderr.len() {
        0 => None,
        m if m == values.len() => Some(stderr),
        _ => return Err(Error::Format("stderr column is only partly filled".into())),
    };
    Ok((values, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_increasing_tail() {
        assert!(TailTable::new(TailLabel::HK, 1, vec![1.0, 0.5, 0.6]).is_err());
        assert!(TailTable::new(TailLabel::MixingMass, 1, vec![1.0, 0.5, 0.6]).is_ok());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(TailTable::new(TailLabel::R, 1, vec![1.5]).is_err());
        assert!(TailTable::new(TailLabel::R, 1, vec![-0.1]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let t = TailTable::with_stderr(TailLabel::HK, 1, vec![1.0, 0.3, 1e-300], vec![0.0, 0.1, 0.2]).unwrap();
        let (v, se) = parse_tail_csv(&tail_csv(&t)).unwrap();
        assert_eq!(v, t.values());
        assert_eq!(se.as_deref(), t.stderr());
        let e = TailTable::new(TailLabel::R, 1, vec![1.0, 1.0 / 3.0]).unwrap();
        let text = tail_csv(&e);
        assert!(text.ends_with(",\n"));
        assert_eq!(parse_tail_csv(&text).unwrap(), (e.values().to_vec(), None));
        assert!(matches!(parse_tail_csv(""), Err(Error::Format(_))));
        assert!(matches!(parse_tail_csv("n,tv\n0,1\n"), Err(Error::Format(_))));
        assert!(matches!(parse_tail_csv("n,value,stderr\n1,1,\n"), Err(Error::Format(_))));
    }

    #[test]
    fn depth_error() {
        let t = TailTable::new(TailLabel::R, 1, vec![1.0, 1.0, 0.5]).unwrap();
        assert_eq!(t.get(2).unwrap(), 0.5);
        assert_eq!(t.get(3), Err(Error::Depth { requested: 3, available: 2 }));
    }
}
