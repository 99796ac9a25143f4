//! Artifact formats: trace CSV (`iteration,beta,s,source`), JSON documents,
//! and Matrix Market dense arrays.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineRun;
use crate::driver::BoTrace;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("format: {0}")]
    Format(String),
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "beta", "s", "source"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub beta: f64,
    pub s: f64,
    pub source: String,
}

pub fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn write_rows<W: Write, I: Iterator<Item = (usize, f64, f64, &'static str)>>(rows: I, w: W) -> Result<(), IoError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for (it, beta, s, source) in rows {
        out.write_record([it.to_string(), beta.to_string(), s.to_string(), source.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bo_trace_csv<W: Write>(trace: &BoTrace, w: W) -> Result<(), IoError> {
    write_rows(trace.rows().map(|(it, b, s, src)| (it, b, s, src.as_str())), w)
}

/// One row per raw draw; `iteration` is the 1-based probe index.
pub fn write_baseline_trace_csv<W: Write>(run: &BaselineRun, w: W) -> Result<(), IoError> {
    write_rows(run.rows().map(|(it, b, s)| (it, b, s, "mc-probe")), w)
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRow>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(TRACE_HEADER) {
        return Err(IoError::Format("trace CSV header must be `iteration,beta,s,source`".into()));
    }
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned, R: Read>(r: R) -> Result<T, IoError> {
    Ok(serde_json::from_reader(r)?)
}

pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    write_json(value, create(path)?)
}

pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    read_json(open(path)?)
}

/// Dense `array real general` Matrix Market, column-major.
pub fn write_matrix_market<W: Write>(m: &DMatrix<f64>, w: W) -> Result<(), IoError> {
    let mut w = BufWriter::new(w);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for x in m.iter() {
        writeln!(w, "{x:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market<R: Read>(r: R) -> Result<DMatrix<f64>, IoError> {
    let mut lines = BufReader::new(r).lines();
    let banner = lines.next().ok_or_else(|| IoError::Format("empty file".into()))??;
    if !banner.to_ascii_lowercase().starts_with("%%matrixmarket matrix array real general") {
        return Err(IoError::Format(format!("unsupported banner `{banner}`")));
    }
    let mut body = lines.filter(|l| !matches!(l, Ok(s) if s.starts_with('%') || s.trim().is_empty()));
    let dims = body.next().ok_or_else(|| IoError::Format("missing size line".into()))??;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| IoError::Format(format!("bad size line `{dims}`"))))
        .collect::<Result<_, _>>()?;
    let [rows, cols] = dims[..] else {
        return Err(IoError::Format("size line needs two integers".into()));
    };
    let mut values = Vec::with_capacity(rows * cols);
    for line in body {
        let line = line?;
        values.push(line.trim().parse::<f64>().map_err(|_| IoError::Format(format!("bad value `{line}`")))?);
    }
    if values.len() != rows * cols {
        return Err(IoError::Format(format!("expected {} values, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_vec(rows, cols, values))
}
