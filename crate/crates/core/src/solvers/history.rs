use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::strategy::Selection;
use crate::error::{Error, Result};

/// Header of the history CSV. Column order is fixed.
pub const CSV_HEADER: &str = "k,residual_norm,rse,bregman,step_term,wall_time_s";

/// State at iteration `k` together with the step that leaves it.
/// The last record of a run has `step_term = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub residual_norm: f64,
    pub rse: Option<f64>,
    /// `D_f^{x*_k}(x_k, x_hat)`
    pub bregman: Option<f64>,
    /// `(eta_k^T r_k)^2 / ||A^T eta_k||^2`
    pub step_term: f64,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn has_bregman(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.bregman.is_some())
    }

    /// CSV text with empty fields for unrecorded quantities.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.17e},{},{},{:.17e},{:.6e}",
                r.k,
                r.residual_norm,
                opt(r.rse),
                opt(r.bregman),
                r.step_term,
                r.wall_time
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::parse(path, 1, format!("expected header `{CSV_HEADER}`"))),
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(Error::parse(path, lineno, format!("expected 6 fields, got {}", fields.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid number `{s}`")))
            };
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            records.push(IterationRecord {
                k: fields[0]
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("invalid iteration `{}`", fields[0])))?,
                residual_norm: num(fields[1])?,
                rse: opt(fields[2])?,
                bregman: opt(fields[3])?,
                step_term: num(fields[4])?,
                wall_time: opt(fields[5])?.unwrap_or(0.0),
                selection: None,
            });
        }
        Ok(ConvergenceHistory { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_values() {
        let h = ConvergenceHistory {
            records: vec![
                IterationRecord {
                    k: 0,
                    residual_norm: 2.5,
                    rse: Some(1.0),
                    bregman: Some(0.1 + 0.2),
                    step_term: 1.0 / 3.0,
                    wall_time: 0.0,
                    selection: None,
                },
                IterationRecord {
                    k: 1,
                    residual_norm: 1e-300,
                    rse: None,
                    bregman: None,
                    step_term: 0.0,
                    wall_time: 1.5e-3,
                    selection: None,
                },
            ],
        };
        let csv = h.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert!(csv.lines().nth(2).unwrap().contains(",,,"));
        let back = ConvergenceHistory::parse_csv(&csv, Path::new("mem")).unwrap();
        assert_eq!(back.records[0].bregman, h.records[0].bregman);
        assert_eq!(back.records[0].step_term, h.records[0].step_term);
        assert_eq!(back.records[1].rse, None);
        assert_eq!(back.records[1].residual_norm, 1e-300);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(ConvergenceHistory::parse_csv("k,foo\n", Path::new("mem")).is_err());
        let bad = format!("{CSV_HEADER}\n0,1,2\n");
        assert!(ConvergenceHistory::parse_csv(&bad, Path::new("mem")).is_err());
    }
}
