//! Dataset loading and saving.
//!
//! Two formats:
//!
//! * **CSV**: one data point per line, comma-separated coordinates, optional
//!   single header line. Rows are points; the matrix stores points as
//!   columns, so an `n`-line file of `d` fields loads as a `d x n` matrix.
//! * **f64le**: binary — magic `"SKM1"` (4 bytes), then `n` and `d` as
//!   unsigned 64-bit little-endian, then `n * d` doubles little-endian in
//!   column-major order (each point contiguous). Round-trips bit-exactly.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use skm_core::{SampleAccessMatrix, SkmError};
use thiserror::Error;

/// Magic bytes opening every binary dataset file.
pub const MAGIC: &[u8; 4] = b"SKM1";

/// On-disk dataset formats.
#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    Default,
    clap::ValueEnum,
    serde::Serialize,
    serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// Sniff the magic bytes: binary when present, CSV otherwise.
    #[default]
    Auto,
    /// Text rows of comma-separated values, optional single header line.
    Csv,
    /// Packed binary: `SKM1` magic, two u64 dims, then little-endian f64s.
    F64le,
}

/// Everything that can go wrong reading or writing a dataset.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: cannot parse '{field}' as a number")]
    ParseError { line: usize, field: String },

    #[error("line {line}: expected {expected} fields, got {got}")]
    RaggedRows {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("dataset contains no data points")]
    EmptyDataset,

    #[error("bad magic bytes (expected 'SKM1')")]
    BadMagic,

    #[error("file truncated: expected {expected} bytes of payload, got {got}")]
    TruncatedFile { expected: u64, got: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Matrix(#[from] SkmError),
}

/// Load a dataset, dispatching on `format` (or the magic bytes for `Auto`).
pub fn load_dataset(path: &Path, format: DataFormat) -> Result<SampleAccessMatrix, DatasetError> {
    let bytes = fs::read(path)?;
    let format = match format {
        DataFormat::Auto => {
            if bytes.len() >= 4 && &bytes[..4] == MAGIC {
                DataFormat::F64le
            } else {
                DataFormat::Csv
            }
        }
        other => other,
    };
    match format {
        DataFormat::Csv => parse_csv(&bytes),
        DataFormat::F64le => parse_f64le(&bytes),
        DataFormat::Auto => unreachable!("resolved above"),
    }
}

/// Parse CSV bytes: rows are points, transposed into the column layout.
fn parse_csv(bytes: &[u8]) -> Result<SampleAccessMatrix, DatasetError> {
    let text = String::from_utf8_lossy(bytes);
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, usize> = fields
            .iter()
            .enumerate()
            .map(|(fi, f)| f.parse::<f64>().map_err(|_| fi))
            .collect();
        match parsed {
            Ok(row) => {
                match d {
                    None => d = Some(row.len()),
                    Some(expected) if expected != row.len() => {
                        return Err(DatasetError::RaggedRows {
                            line: line_no,
                            expected,
                            got: row.len(),
                        });
                    }
                    Some(_) => {}
                }
                values.extend(row);
                n += 1;
            }
            Err(field_idx) => {
                // A single unparsable first line is a header; anything later
                // (or a second offender) is an error.
                if idx == 0 && d.is_none() {
                    continue;
                }
                return Err(DatasetError::ParseError {
                    line: line_no,
                    field: fields[field_idx].to_string(),
                });
            }
        }
    }
    let d = d.ok_or(DatasetError::EmptyDataset)?;
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(SampleAccessMatrix::from_columns(d, n, values)?)
}

/// Parse the binary format.
fn parse_f64le(bytes: &[u8]) -> Result<SampleAccessMatrix, DatasetError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let header_len = 4 + 8 + 8;
    if bytes.len() < header_len {
        return Err(DatasetError::TruncatedFile {
            expected: header_len as u64,
            got: bytes.len() as u64,
        });
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes"));
    let d = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let payload = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or(DatasetError::BadMagic)?;
    let expected = header_len as u64 + payload;
    if (bytes.len() as u64) < expected {
        return Err(DatasetError::TruncatedFile {
            expected,
            got: bytes.len() as u64,
        });
    }
    let mut values = Vec::with_capacity((n * d) as usize);
    for chunk in bytes[header_len..header_len + payload as usize].chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
    }
    if n == 0 || d == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(SampleAccessMatrix::from_columns(
        d as usize, n as usize, values,
    )?)
}

/// Write a matrix in the binary format (bit-exact round trip).
pub fn write_f64le(path: &Path, m: &SampleAccessMatrix) -> Result<(), DatasetError> {
    let file = fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&(m.n() as u64).to_le_bytes())?;
    w.write_all(&(m.d() as u64).to_le_bytes())?;
    for i in 0..m.n() {
        let col = m.column(i)?;
        for &v in col {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a matrix as CSV (rows are points). Values are printed with enough
/// digits to round-trip.
pub fn write_csv(path: &Path, m: &SampleAccessMatrix) -> Result<(), DatasetError> {
    let file = fs::File::create(path)?;
    let mut w = io::BufWriter::new(file);
    let mut line = String::new();
    for i in 0..m.n() {
        let col = m.column(i)?;
        line.clear();
        for (l, &v) in col.iter().enumerate() {
            if l > 0 {
                line.push(',');
            }
            // Shortest representation that parses back to the same f64.
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read only the header of a binary dataset (for cheap shape inspection).
pub fn read_f64le_shape(path: &Path) -> Result<(u64, u64), DatasetError> {
    let mut file = fs::File::open(path)?;
    let mut header = [0u8; 20];
    file.read_exact(&mut header)
        .map_err(|_| DatasetError::TruncatedFile {
            expected: 20,
            got: fs::metadata(path).map(|m| m.len()).unwrap_or(0),
        })?;
    if &header[..4] != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let n = u64::from_le_bytes(header[4..12].try_into().expect("8 bytes"));
    let d = u64::from_le_bytes(header[12..20].try_into().expect("8 bytes"));
    Ok((n, d))
}
