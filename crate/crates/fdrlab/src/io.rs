//! Atomic file output, CSV formatting and input readers.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fdrlab_core::ttest::{Group, TwoSampleDataset};

use crate::error::AppError;

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

/// A set of named outputs, written only once all are rendered.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>, AppError> {
        self.files
            .iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                write_atomic(&p, bytes)?;
                Ok(p)
            })
            .collect()
    }
}

/// Shortest round-trip representation; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// CSV text with LF line endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let line: Vec<&str> = cells.iter().map(|c| c.as_ref()).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// One p-value per line; blank lines and `#` comments are skipped.
pub fn read_pvalues(path: &Path) -> Result<Vec<f64>, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let v: f64 = s.parse().map_err(|_| AppError::Parse {
            path: path.into(),
            line: i + 1,
            reason: format!("not a number: {s:?}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Reads an expression matrix (header row, then `feature_id,v1,...,vn`) and a
/// `sample_id,group` labels file listing samples in matrix column order.
pub fn read_dataset(matrix: &Path, labels: &Path) -> Result<TwoSampleDataset, AppError> {
    let groups = read_labels(labels)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(matrix)
        .map_err(|e| csv_error(matrix, e))?;
    let header = rdr.headers().map_err(|e| csv_error(matrix, e))?.clone();
    if header.len() != groups.len() + 1 {
        return Err(AppError::Parse {
            path: matrix.into(),
            line: 1,
            reason: format!("{} sample columns but {} labels", header.len().saturating_sub(1), groups.len()),
        });
    }
    let mut values = Vec::new();
    let mut ids = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(matrix, e))?;
        let line = i + 2;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        for cell in rec.iter().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| AppError::Parse {
                path: matrix.into(),
                line,
                reason: format!("missing or non-numeric value {cell:?}"),
            })?;
            values.push(v);
        }
    }
    Ok(TwoSampleDataset::new(values, groups, ids)?)
}

fn read_labels(path: &Path) -> Result<Vec<Group>, AppError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let g = match rec.get(1).map(str::trim) {
            Some("X") => Group::X,
            Some("Y") => Group::Y,
            other => {
                return Err(AppError::Parse {
                    path: path.into(),
                    line: i + 2,
                    reason: format!("group must be X or Y, found {other:?}"),
                })
            }
        };
        out.push(g);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    AppError::Parse {
        path: path.into(),
        line,
        reason: e.to_string(),
    }
}
