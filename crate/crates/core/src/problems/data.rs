//! Labelled datasets for logistic regression.
//!
//! Two text formats are accepted:
//!
//! * dense CSV: one sample per line, comma-separated decimal fields, no
//!   header; all fields but the last are features, the last is the label;
//! * sparse: one sample per line, `label idx:value idx:value ...` separated
//!   by spaces or tabs, with 1-based strictly increasing indices and omitted
//!   entries equal to zero.
//!
//! Labels must be exactly `1` or `-1` (any spelling that parses to those
//! values, e.g. `+1`, `-1.0`). Blank lines are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    /// Row-major `n × d`.
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }
}

fn parse_label(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: label {s:?} is not a number")))?;
    if v == 1.0 || v == -1.0 {
        Ok(v)
    } else {
        Err(Error::Data(format!("line {line}: label {s:?} is not ±1")))
    }
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("line {line}: non-finite value {s:?}")));
    }
    Ok(v)
}

pub fn parse_dense_csv(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut d = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Data(format!(
                "line {line}: need at least one feature and a label"
            )));
        }
        let width = rec.len() - 1;
        match d {
            None => d = Some(width),
            Some(w) if w != width => {
                return Err(Error::Data(format!(
                    "line {line}: {width} features, expected {w}"
                )))
            }
            _ => {}
        }
        for f in rec.iter().take(width) {
            features.push(parse_value(f, line)?);
        }
        labels.push(parse_label(&rec[width], line)?);
    }
    let d = d.ok_or_else(|| Error::Data("dataset is empty".into()))?;
    Ok(Dataset {
        n: labels.len(),
        d,
        features,
        labels,
    })
}

/// Parses the sparse format. With `dim = None` the dimension is the largest
/// index present; otherwise indices above `dim` are an error.
pub fn parse_sparse(text: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_idx = 0usize;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut tokens = raw.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        labels.push(parse_label(label, line)?);
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::Data(format!("line {line}: expected idx:value, got {tok:?}")))?;
            let idx: usize = i
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: bad index {i:?}")))?;
            if idx == 0 {
                return Err(Error::Data(format!("line {line}: indices are 1-based")));
            }
            if idx <= last {
                return Err(Error::Data(format!(
                    "line {line}: indices must be strictly increasing"
                )));
            }
            if let Some(dm) = dim {
                if idx > dm {
                    return Err(Error::Data(format!(
                        "line {line}: index {idx} exceeds dimension {dm}"
                    )));
                }
            }
            last = idx;
            max_idx = max_idx.max(idx);
            row.push((idx - 1, parse_value(v, line)?));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    let d = dim.unwrap_or(max_idx);
    if d == 0 {
        return Err(Error::Data("dataset has no features".into()));
    }
    let mut features = vec![0.0; rows.len() * d];
    for (r, row) in rows.iter().enumerate() {
        for &(k, v) in row {
            features[r * d + k] = v;
        }
    }
    Ok(Dataset {
        n: rows.len(),
        d,
        features,
        labels,
    })
}

pub fn load_dense_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_dense_csv(&fs::read_to_string(path)?)
}

pub fn load_sparse(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    parse_sparse(&fs::read_to_string(path)?, dim)
}
