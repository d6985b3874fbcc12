//! Comparison tables and their CSV / text renderings.

use std::path::Path;

use crate::error::io_err;
use crate::models::fmt_f64;
use crate::stats::{mean, sample_std, wilcoxon_paired};
use crate::{Error, Result};

/// One method/divergence row with its per-seed target accuracies.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub divergence: String,
    pub gamma: Option<f64>,
    pub accs: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Two-sided Wilcoxon p-value against the first row, paired by seed.
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Text,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl ComparisonTable {
    /// Builds rows from `(method, divergence, gamma, accs)`; the first row
    /// is the reference for the p-values.
    pub fn new(seeds: Vec<u64>, rows: Vec<(String, String, Option<f64>, Vec<f64>)>) -> Result<Self> {
        for r in &rows {
            if r.3.len() != seeds.len() {
                return Err(Error::Config(format!(
                    "row {}/{} has {} accuracies for {} seeds",
                    r.0,
                    r.1,
                    r.3.len(),
                    seeds.len()
                )));
            }
        }
        let reference = rows.first().map(|r| r.3.clone());
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, (method, divergence, gamma, accs))| {
                let p_value = match (&reference, i) {
                    (Some(r), i) if i > 0 && accs.iter().chain(r).all(|a| a.is_finite()) => {
                        Some(wilcoxon_paired(&accs, r).p_value)
                    }
                    _ => None,
                };
                ComparisonRow {
                    method,
                    divergence,
                    gamma,
                    mean: mean(&accs),
                    std: sample_std(&accs),
                    accs,
                    p_value,
                }
            })
            .collect();
        Ok(Self { seeds, rows })
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["method", "divergence", "gamma", "mean", "std", "p_value"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.seeds.iter().map(|s| format!("acc_s{s}")));
        h
    }

    fn cells(&self, num: fn(f64) -> String) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut c = vec![
                    r.method.clone(),
                    r.divergence.clone(),
                    r.gamma.map(num).unwrap_or_default(),
                    num(r.mean),
                    num(r.std),
                    r.p_value.map(num).unwrap_or_default(),
                ];
                c.extend(r.accs.iter().map(|&a| num(a)));
                c
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",");
        out.push('\n');
        for row in self.cells(fmt_f64) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = align(&self.header(), &self.cells(|v| format!("{v:.4}")));
        if self.rows.len() > 1 {
            s.push_str(&format!(
                "p_value: two-sided Wilcoxon signed-rank against row 1, {}\n",
                crate::stats::ZERO_CONVENTION
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, m: String| Error::Parse {
            path: "comparison table".into(),
            line,
            message: m,
        };
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad(1, "empty table".into()))?.split(',').collect();
        let fixed = ["method", "divergence", "gamma", "mean", "std", "p_value"];
        if header.len() < fixed.len() || header[..fixed.len()] != fixed {
            return Err(bad(1, format!("unexpected header {header:?}")));
        }
        let seeds = header[fixed.len()..]
            .iter()
            .map(|h| {
                h.strip_prefix("acc_s")
                    .and_then(|s| s.parse::<u64>().ok())
                    .ok_or_else(|| bad(1, format!("bad seed column {h:?}")))
            })
            .collect::<Result<Vec<u64>>>()?;
        let num = |line: usize, s: &str| -> Result<f64> { s.parse::<f64>().map_err(|_| bad(line, format!("bad number {s:?}"))) };
        let opt = |line: usize, s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(line, s).map(Some)
            }
        };
        let mut rows = Vec::new();
        for (i, l) in lines.enumerate() {
            let line = i + 2;
            let c: Vec<&str> = l.split(',').collect();
            if c.len() != header.len() {
                return Err(bad(line, format!("expected {} fields, found {}", header.len(), c.len())));
            }
            rows.push(ComparisonRow {
                method: c[0].into(),
                divergence: c[1].into(),
                gamma: opt(line, c[2])?,
                mean: num(line, c[3])?,
                std: num(line, c[4])?,
                p_value: opt(line, c[5])?,
                accs: c[6..].iter().map(|s| num(line, s)).collect::<Result<Vec<f64>>>()?,
            });
        }
        Ok(Self { seeds, rows })
    }

    pub fn row(&self, method: &str, divergence: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method && r.divergence == divergence)
    }
}

pub fn emit_report(table: &ComparisonTable, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => table.to_csv(),
        Format::Text => table.to_text(),
    };
    std::fs::write(path, body).map_err(io_err(path))
}

/// Left-aligned columns, each as wide as its widest cell.
pub fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("{}\n", parts.join("  ").trim_end())
    };
    let mut out = line(header);
    for r in rows {
        out.push_str(&line(r));
    }
    out
}
