//! Flat CSV results shared by `evaluate`, `sweep` and `report`.

use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const COLUMNS: [&str; 12] = [
    "method",
    "r",
    "m",
    "kernel",
    "epsilon",
    "lambda",
    "normalize",
    "metric",
    "value",
    "train_time_s",
    "source",
    "error",
];

/// One evaluated configuration. `source` is `computed` for rows produced
/// by this tool and `external` for imported baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub r: usize,
    pub m: usize,
    pub kernel: Option<String>,
    pub epsilon: Option<f64>,
    pub lambda: f64,
    pub normalize: bool,
    pub metric: String,
    pub value: Option<f64>,
    pub train_time_s: Option<f64>,
    pub source: String,
    pub error: Option<String>,
}

impl ResultRow {
    /// Series key used in summaries and plots, e.g. `kernel/gaussian`.
    pub fn series(&self) -> String {
        match &self.kernel {
            Some(k) => format!("{}/{k}", self.method),
            None => self.method.clone(),
        }
    }

    /// The row with timing removed, for comparing reruns.
    pub fn without_timing(&self) -> ResultRow {
        ResultRow {
            train_time_s: None,
            ..self.clone()
        }
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(COLUMNS).map_err(|e| csv_io(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(COLUMNS).map_err(|e| csv_io(path, e))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a results CSV, rejecting files without rows or with a different
/// header.
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rd = csv::Reader::from_reader(file);
    let headers = rd
        .headers()
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() {
        return Err(CliError::Schema(format!("{} is empty", path.display())));
    }
    if headers.iter().ne(COLUMNS) {
        return Err(CliError::Schema(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            COLUMNS.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.deserialize().enumerate() {
        let row: ResultRow = rec.map_err(|e| CliError::Schema(format!("{} row {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Schema(format!("{} has no data rows", path.display())));
    }
    Ok(rows)
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: Option<f64>, error: Option<&str>) -> ResultRow {
        ResultRow {
            method: "kernel".into(),
            r: 10,
            m: 100,
            kernel: Some("gaussian".into()),
            epsilon: Some(0.1),
            lambda: 1e-9,
            normalize: true,
            metric: "mean_rel_l2".into(),
            value,
            train_time_s: Some(1.5),
            source: "computed".into(),
            error: error.map(String::from),
        }
    }

    #[test]
    fn round_trip_with_missing_values_and_commas() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![row(Some(0.1 + 0.2), None), row(None, Some("singular, really"))];
        write_rows(&path, &rows).unwrap();
        assert_eq!(read_rows(&path).unwrap(), rows);
    }

    #[test]
    fn append_writes_header_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        append_rows(&path, &[row(Some(1.0), None)]).unwrap();
        append_rows(&path, &[row(Some(2.0), None)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("method,r,m").count(), 1);
        assert_eq!(read_rows(&path).unwrap().len(), 2);
    }

    #[test]
    fn empty_file_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_rows(&path), Err(CliError::Schema(_))));
        std::fs::write(&path, COLUMNS.join(",") + "\n").unwrap();
        assert!(matches!(read_rows(&path), Err(CliError::Schema(_))));
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_rows(&path), Err(CliError::Schema(_))));
    }
}
