//! Dataset files.
//!
//! Two formats share one reader, told apart by the leading bytes. The text
//! form is a `d n R` header line followed by `n` rows of `d` space-separated
//! decimals; values are written with the shortest decimal that parses back
//! to the same bits, so a write/read cycle is exact. The binary form is the
//! magic `PMV1`, three little-endian u64 header words (`d`, `n`, and the
//! radius bits), then the points as row-major little-endian f64.

use privmoment::Dataset;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"PMV1";

const BINARY_HEADER_LEN: usize = 28;

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error("{path} line {line}: {reason}")]
    Line {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Reject {
        path: String,
        source: privmoment::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FileFormat {
    Text,
    Binary,
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_dataset(path: &Path) -> Result<Dataset, FileError> {
    let bytes = fs::read(path).map_err(|source| FileError::Io { path: show(path), source })?;
    if bytes.starts_with(&MAGIC) {
        parse_binary(path, &bytes)
    } else {
        parse_text(path, &bytes)
    }
}

pub fn write_dataset(data: &Dataset, path: &Path, format: FileFormat) -> Result<(), FileError> {
    let bytes = match format {
        FileFormat::Text => render_text(data).into_bytes(),
        FileFormat::Binary => render_binary(data),
    };
    fs::write(path, bytes).map_err(|source| FileError::Io { path: show(path), source })
}

fn render_text(data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", data.dim(), data.len(), data.radius());
    for i in 0..data.len() {
        for (j, v) in data.point(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

fn render_binary(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + 8 * data.points_flat().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(data.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    out.extend_from_slice(&data.radius().to_bits().to_le_bytes());
    for v in data.points_flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn parse_text(path: &Path, bytes: &[u8]) -> Result<Dataset, FileError> {
    let fmt = |reason: String| FileError::Format { path: show(path), reason };
    let text = std::str::from_utf8(bytes)
        .map_err(|_| fmt("not valid UTF-8 text (and not a PMV1 binary file)".into()))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| fmt("empty file, expected a `d n R` header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(fmt(format!(
            "malformed header: expected `d n R`, found {} fields",
            fields.len()
        )));
    }
    let d: usize = fields[0]
        .parse()
        .map_err(|_| fmt(format!("malformed header: dimension {:?} is not a count", fields[0])))?;
    let n: usize = fields[1]
        .parse()
        .map_err(|_| fmt(format!("malformed header: size {:?} is not a count", fields[1])))?;
    let radius: f64 = fields[2]
        .parse()
        .map_err(|_| fmt(format!("malformed header: radius {:?} is not a number", fields[2])))?;

    let mut points = Vec::with_capacity(d.saturating_mul(n));
    for row in 0..n {
        let (idx, line) = lines.next().ok_or_else(|| {
            fmt(format!("file ends after {row} data rows, header promised {n}"))
        })?;
        let line_no = idx + 1;
        let mut got = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| FileError::Line {
                path: show(path),
                line: line_no,
                reason: format!("value {tok:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(FileError::Line {
                    path: show(path),
                    line: line_no,
                    reason: format!("non-finite value {tok:?}"),
                });
            }
            points.push(v);
            got += 1;
        }
        if got != d {
            return Err(FileError::Line {
                path: show(path),
                line: line_no,
                reason: format!("expected {d} values, found {got}"),
            });
        }
    }
    for (idx, line) in lines {
        if !line.trim().is_empty() {
            return Err(FileError::Line {
                path: show(path),
                line: idx + 1,
                reason: format!("unexpected data after the {n} rows the header promised"),
            });
        }
    }

    Dataset::new(d, points, radius).map_err(|source| FileError::Reject { path: show(path), source })
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Dataset, FileError> {
    let fmt = |reason: String| FileError::Format { path: show(path), reason };
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(fmt(format!(
            "truncated binary header: need {BINARY_HEADER_LEN} bytes, found {}",
            bytes.len()
        )));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let d = usize::try_from(word(4)).map_err(|_| fmt("header dimension overflows usize".into()))?;
    let n = usize::try_from(word(12)).map_err(|_| fmt("header size overflows usize".into()))?;
    let radius = f64::from_bits(word(20));

    let values = d
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| fmt("header implies an impossibly large payload".into()))?;
    let payload = &bytes[BINARY_HEADER_LEN..];
    if payload.len() != values {
        return Err(fmt(format!(
            "payload is {} bytes, header implies {values}",
            payload.len()
        )));
    }

    let mut points = Vec::with_capacity(d * n);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(fmt(format!(
                "non-finite value at row {}, column {}",
                i / d.max(1),
                i % d.max(1)
            )));
        }
        points.push(v);
    }

    Dataset::new(d, points, radius).map_err(|source| FileError::Reject { path: show(path), source })
}
