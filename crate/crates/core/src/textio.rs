//! Small helpers shared by the delimited-text and JSON readers/writers.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

/// A failure reading or writing an input/output file, with the line number
/// when the underlying parser reports one.
#[derive(Debug, Error)]
pub struct FileError {
    pub path: String,
    pub line: Option<u64>,
    pub msg: String,
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path, line, self.msg),
            None => write!(f, "{}: {}", self.path, self.msg),
        }
    }
}

impl FileError {
    pub fn new(path: &Path, line: Option<u64>, msg: impl Into<String>) -> Self {
        FileError {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(path, None, err.to_string())
    }

    pub fn csv(path: &Path, err: csv::Error) -> Self {
        let line = err.position().map(|p| p.line());
        Self::new(path, line, err.to_string())
    }

    pub fn json(path: &Path, err: serde_json::Error) -> Self {
        let line = (err.line() > 0).then_some(err.line() as u64);
        Self::new(path, line, err.to_string())
    }
}

pub fn csv_reader(path: &Path) -> Result<csv::Reader<File>, FileError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| FileError::csv(path, e))
}

/// Writer that emits `header` first; records are written without serde's
/// automatic header row.
pub fn csv_writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, FileError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| FileError::csv(path, e))?;
    w.write_record(header).map_err(|e| FileError::csv(path, e))?;
    Ok(w)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let file = File::open(path).map_err(|e| FileError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| FileError::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FileError> {
    let file = File::create(path).map_err(|e| FileError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| FileError::json(path, e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| FileError::io(path, e))
}
