//! JSON run reports and CSV matrix/profile output.
//!
//! CSV floats are written with `{:.16e}`, LF line endings and a header row
//! of vertex labels, so files are byte-stable across platforms.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Serialize a matrix as an array of rows.
pub fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_rows(m).serialize(s)
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Hex SHA-256 digest of the raw input bytes.
pub fn input_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Envelope shared by every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<T: Serialize> {
    pub task: String,
    pub version: String,
    pub input_sha256: Option<String>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub results: T,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(task: impl Into<String>, input: Option<&[u8]>, seed: Option<u64>, wall_time_s: f64, results: T) -> Self {
        Self {
            task: task.into(),
            version: VERSION.to_string(),
            input_sha256: input.map(input_digest),
            seed,
            wall_time_s,
            results,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self).map_err(|e| crate::Error::Numerical(e.to_string()))? + "\n")
    }
}

/// Render a square matrix as CSV with a label header row.
pub fn matrix_csv(m: &DMatrix<f64>, labels: Option<&[String]>) -> String {
    let header: Vec<String> = match labels {
        Some(l) => l.to_vec(),
        None => (0..m.ncols()).map(|j| j.to_string()).collect(),
    };
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Render named columns of equal length as CSV.
pub fn columns_csv(names: &[&str], columns: &[&[f64]]) -> String {
    let mut out = names.join(",");
    out.push('\n');
    let len = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    for k in 0..len {
        let row: Vec<String> = columns.iter().map(|c| format!("{:.16e}", c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse a matrix CSV produced by [`matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| crate::Error::Parse { location: "csv".into(), message: "empty file".into() })?;
    let n = header.split(',').count();
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| crate::Error::Parse { location: format!("csv line {}", k + 2), message: e.to_string() })?;
        if vals.len() != n {
            return Err(crate::Error::Parse { location: format!("csv line {}", k + 2), message: format!("expected {n} fields") });
        }
        data.extend(vals);
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, n, &data))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5e-17, std::f64::consts::PI]);
        let text = matrix_csv(&m, Some(&["a".into(), "b".into()]));
        assert!(text.starts_with("a,b\n"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_matrix_csv(&text).unwrap(), m);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(input_digest(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
