//! Whitespace-separated column files in the style of the DAISY archive.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::sysmodel::TimeSeries;

/// Where a dataset lives and how its columns and samples are used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub input_columns: Vec<usize>,
    pub output_columns: Vec<usize>,
    #[serde(default)]
    pub skip_columns: Vec<usize>,
    /// `N`
    pub estimation_length: usize,
    /// `N_val`
    pub validation_length: usize,
    /// Validate on the estimation data itself.
    #[serde(default)]
    pub reuse: bool,
    /// JSON-serialized generating model, when the data are synthetic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_model: Option<PathBuf>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.output_columns.is_empty() {
            return Err(SysIdError::Config(format!("dataset {}: no output columns", self.name)));
        }
        let mut seen = HashSet::new();
        for c in self
            .input_columns
            .iter()
            .chain(&self.output_columns)
            .chain(&self.skip_columns)
        {
            if !seen.insert(*c) {
                return Err(SysIdError::Config(format!(
                    "dataset {}: column {c} is used twice",
                    self.name
                )));
            }
        }
        if self.estimation_length == 0 || self.validation_length == 0 {
            return Err(SysIdError::Config(format!(
                "dataset {}: estimation and validation lengths must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// Samples the file must hold.
    pub fn required_length(&self) -> usize {
        if self.reuse {
            self.estimation_length.max(self.validation_length)
        } else {
            self.estimation_length + self.validation_length
        }
    }

    /// Contiguous estimation and validation segments.
    pub fn split(&self, ts: &TimeSeries) -> Result<(TimeSeries, TimeSeries)> {
        if ts.len() < self.required_length() {
            return Err(SysIdError::InsufficientData {
                what: "estimation/validation split",
                required: self.required_length(),
                available: ts.len(),
            });
        }
        let est = ts.segment(0, self.estimation_length)?;
        let val_start = if self.reuse { 0 } else { self.estimation_length };
        Ok((est, ts.segment(val_start, self.validation_length)?))
    }
}

/// Parses a numeric column file. Lines starting with `#` or `%` and blank
/// lines are skipped.
pub fn parse_columns(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut row = Vec::new();
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| SysIdError::Parse {
                line: idx + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            if v.is_nan() {
                return Err(SysIdError::Parse {
                    line: idx + 1,
                    message: "NaN value".into(),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(SysIdError::Parse {
                    line: idx + 1,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn select(table: &DMatrix<f64>, cols: &[usize]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(cols.len(), table.nrows());
    for (k, &c) in cols.iter().enumerate() {
        if c >= table.ncols() {
            return Err(SysIdError::Config(format!(
                "column {c} out of range, file has {} columns",
                table.ncols()
            )));
        }
        out.row_mut(k).copy_from(&table.column(c).transpose());
    }
    Ok(out)
}

/// Reads the file named by `spec` and maps its columns to inputs and outputs.
pub fn load_daisy(spec: &DatasetSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let text = fs::read_to_string(&spec.path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", spec.path.display())))?;
    let table = parse_columns(&text)?;
    TimeSeries::new(
        select(&table, &spec.input_columns)?,
        select(&table, &spec.output_columns)?,
    )
}

/// Writes `ts` as `u_1 … u_ni y_1 … y_no` per line with round-trip precision.
pub fn write_daisy(path: &Path, ts: &TimeSeries) -> Result<()> {
    fs::write(path, format_daisy(ts))?;
    Ok(())
}

pub fn format_daisy(ts: &TimeSeries) -> String {
    let mut out = String::new();
    for k in 0..ts.len() {
        let fields: Vec<String> =
            ts.u.column(k)
                .iter()
                .chain(ts.y.column(k).iter())
                .map(|v| format!("{v:e}"))
                .collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}
