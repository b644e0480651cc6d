//! Report writers: pretty JSON documents and CSV tables.
//!
//! CSV floats are written by the `csv` serializer, which emits the shortest
//! decimal string that round-trips to the same `f64`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::AppError;

/// Where a command writes its files.
#[derive(Clone, Debug)]
pub struct Sink {
    dir: PathBuf,
    prefix: String,
}

impl Sink {
    /// Files go to `dir/prefix.{json,csv}`.
    pub fn new(dir: impl Into<PathBuf>, prefix: impl Into<String>) -> Result<Self, AppError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| AppError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Sink {
            dir,
            prefix: prefix.into(),
        })
    }

    fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.prefix))
    }

    /// Writes the JSON report; returns its path.
    pub fn json(&self, doc: &Value) -> Result<PathBuf, AppError> {
        let path = self.path("json");
        let mut text =
            serde_json::to_string_pretty(doc).map_err(|e| AppError::Io(e.to_string()))?;
        text.push('\n');
        write(&path, text.as_bytes())?;
        Ok(path)
    }

    /// Writes serializable rows as CSV with a header row; returns its path.
    pub fn csv<R: Serialize>(&self, rows: &[R]) -> Result<PathBuf, AppError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| AppError::Io(e.to_string()))?;
        }
        self.finish(w)
    }

    /// Writes a CSV with an explicit header and string records.
    pub fn csv_records(
        &self,
        header: &[String],
        records: &[Vec<String>],
    ) -> Result<PathBuf, AppError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)
            .map_err(|e| AppError::Io(e.to_string()))?;
        for r in records {
            w.write_record(r).map_err(|e| AppError::Io(e.to_string()))?;
        }
        self.finish(w)
    }

    fn finish(&self, w: csv::Writer<Vec<u8>>) -> Result<PathBuf, AppError> {
        let bytes = w.into_inner().map_err(|e| AppError::Io(e.to_string()))?;
        let path = self.path("csv");
        write(&path, &bytes)?;
        Ok(path)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    fs::write(path, bytes).map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

/// Shortest round-trip decimal form of a float (as used in the CSV files).
pub fn float(x: f64) -> String {
    if x.is_finite() {
        let mut b = ryu::Buffer::new();
        b.format_finite(x).to_string()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
