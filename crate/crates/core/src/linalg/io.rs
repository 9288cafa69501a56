//! CSV matrix and label files.
//!
//! Matrices: one row per line, comma separated, no header. Values are written
//! with 17 significant digits so that a write/read cycle is exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::matrix::DenseMatrix;
use crate::error::{Result, SdlError};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_csv_string(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv_str(text: &str) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SdlError::Parse(format!("line {}: {e}", lineno + 1)))?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| SdlError::Parse(format!("line {}: cannot parse {field:?}", lineno + 1)))?;
            if !v.is_finite() {
                return Err(SdlError::Parse(format!("line {}: non-finite value {field:?}", lineno + 1)));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(SdlError::Parse(format!(
                    "line {}: ragged row ({} fields, expected {})",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SdlError::Parse("empty matrix file".into()));
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
    matrix_from_csv_str(&text).map_err(|e| match e {
        SdlError::Parse(m) => SdlError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_bytes(path, matrix_to_csv_string(m).as_bytes())
}

pub fn labels_from_str(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| SdlError::Parse(format!("line {}: bad label {l:?}", i + 1)))
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
    labels_from_str(&text)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 2);
    for y in labels {
        out.push_str(&y.to_string());
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// CSV with a header line and one record per line; fields stay text so that
/// tag columns survive. Numeric columns are read with [`CsvTable::column_f64`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SdlError::Parse(format!("no column {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<&str>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.trim().parse::<f64>().map_err(|_| SdlError::Parse(format!("row {}: {name} = {v:?} is not a number", i + 1)))
            })
            .collect()
    }

    /// The columns named in `names`, as a `rows×names.len()` matrix.
    pub fn numeric(&self, names: &[&str]) -> Result<DenseMatrix> {
        let cols: Vec<Vec<f64>> = names.iter().map(|n| self.column_f64(n)).collect::<Result<_>>()?;
        Ok(DenseMatrix::from_fn(self.rows.len(), names.len(), |i, j| cols[j][i]))
    }
}

pub fn table_from_csv_str(text: &str) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| SdlError::Parse(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(SdlError::Parse("missing header".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SdlError::Parse(format!("line {}: {e}", i + 2)))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(CsvTable { header, rows })
}

pub fn read_table_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
    table_from_csv_str(&text).map_err(|e| match e {
        SdlError::Parse(m) => SdlError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(bytes).map_err(|e| SdlError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}
