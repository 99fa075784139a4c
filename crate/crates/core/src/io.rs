//! Dataset ingestion and matrix persistence.
//!
//! CSV datasets have one row per sample. Leading lines beginning with `#`
//! are directives; `#kind=raw|hist|sphere` declares how to read the values.
//! The first non-directive line is a header: a column named `label` holds
//! integer class ids, a column named `id` holds sample names, and every
//! other column is numeric.
//!
//! The binary matrix format is the magic `SLRR`, then `u32` rows and `u32`
//! columns, then `rows * cols` little-endian `f64` values in row-major order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::features::{Kind, RawSample};

pub const MAGIC: &[u8; 4] = b"SLRR";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed input: {0}")]
    Format(String),
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => IoError::Io(io),
                other => IoError::Format(format!("{other:?}")),
            }
        } else {
            IoError::Format(e.to_string())
        }
    }
}

fn format_err(msg: impl Into<String>) -> IoError {
    IoError::Format(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Declared by a `#kind=` directive, if any.
    pub kind: Option<Kind>,
    /// Names of the numeric columns.
    pub columns: Vec<String>,
    pub samples: Vec<RawSample>,
}

impl Dataset {
    pub fn has_labels(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.class_label.is_some())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Parses a CSV dataset from text.
pub fn parse_csv(text: &str) -> Result<Dataset, IoError> {
    let mut kind = None;
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            body_start += line.len();
            continue;
        }
        let Some(directive) = trimmed.strip_prefix('#') else { break };
        if let Some(value) = directive.trim().strip_prefix("kind=") {
            kind = Some(value.parse::<Kind>().map_err(|e| format_err(e.to_string()))?);
        }
        body_start += line.len();
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(format_err("input has no header row"));
    }
    let label_col = header.iter().position(|h| h == "label");
    let id_col = header.iter().position(|h| h == "id");
    let value_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_col && Some(c) != id_col).collect();
    if value_cols.is_empty() {
        return Err(format_err("input has no value columns"));
    }
    let columns = value_cols.iter().map(|&c| header[c].to_string()).collect();

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).ok_or_else(|| format_err(format!("row {row}: missing column {c}")));
        let values = value_cols
            .iter()
            .map(|&c| {
                let raw = field(c)?;
                raw.parse::<f64>()
                    .map_err(|_| format_err(format!("row {row}: {raw:?} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => row.to_string(),
        };
        let mut sample = RawSample::new(id, values);
        if let Some(c) = label_col {
            let raw = field(c)?;
            let label = raw
                .parse::<i64>()
                .map_err(|_| format_err(format!("row {row}: label {raw:?} is not an integer")))?;
            sample = sample.with_label(label);
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(format_err("input has no samples"));
    }
    Ok(Dataset { kind, columns, samples })
}

/// Serializes a dataset so that [`parse_csv`] reads it back exactly.
pub fn write_csv<W: Write>(out: W, data: &Dataset) -> Result<(), IoError> {
    let mut out = out;
    if let Some(kind) = data.kind {
        writeln!(out, "#kind={}", kind.as_str())?;
    }
    let labelled = data.has_labels();
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    if labelled {
        header.push("label".into());
    }
    header.extend(data.columns.iter().cloned());
    writer.write_record(&header)?;
    for s in &data.samples {
        let mut row = vec![s.id.clone()];
        if labelled {
            row.push(s.class_label.unwrap_or_default().to_string());
        }
        row.extend(s.values.iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a matrix as headerless CSV, one matrix row per line, using the
/// shortest decimal form that reads back to the same `f64`.
pub fn write_matrix_csv<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    let mut line = String::new();
    for r in 0..m.nrows() {
        line.clear();
        for c in 0..m.ncols() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&m[(r, c)].to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_csv(text: &str) -> Result<DMatrix<f64>, IoError> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| format_err(format!("{v:?} is not a number"))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(format_err("ragged matrix"));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

pub fn write_matrix_bin<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<(), IoError> {
    let rows = u32::try_from(m.nrows()).map_err(|_| format_err("too many rows"))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| format_err("too many columns"))?;
    out.write_all(MAGIC)?;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.write_all(&m[(r, c)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_bin<R: Read>(mut input: R) -> Result<DMatrix<f64>, IoError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    parse_matrix_bin(&bytes)
}

fn parse_matrix_bin(bytes: &[u8]) -> Result<DMatrix<f64>, IoError> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(format_err("missing SLRR header"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let payload = &bytes[12..];
    let want = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_err("matrix dimensions overflow"))?;
    if payload.len() != want {
        return Err(format_err(format!("expected {want} payload bytes, found {}", payload.len())));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok(DMatrix::from_row_iterator(rows, cols, values))
}

/// Reads a dataset from either format, sniffing the binary magic.
pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        let m = parse_matrix_bin(&bytes)?;
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(format_err("input has no samples"));
        }
        let samples = (0..m.nrows())
            .map(|r| RawSample::new(r.to_string(), m.row(r).iter().copied().collect()))
            .collect();
        let columns = (0..m.ncols()).map(|c| format!("v{c}")).collect();
        return Ok(Dataset { kind: None, columns, samples });
    }
    let text = String::from_utf8(bytes).map_err(|_| format_err("input is neither UTF-8 CSV nor SLRR binary"))?;
    parse_csv(&text)
}
