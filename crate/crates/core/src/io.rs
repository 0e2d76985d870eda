//! Binary feature-matrix dump format and CSV export.
//!
//! Layout: a 16-byte header — magic `ASDF`, format version (u16 LE), two
//! reserved bytes, row count (u32 LE), column count (u32 LE) — followed by
//! row-major 64-bit little-endian reals.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ASDF";
const VERSION: u16 = 1;

/// A feature matrix loaded from or destined for a dump file.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch {
                context: "FeatureMatrix::new",
                expected: format!("{rows}x{cols}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(FeatureMatrix { rows, cols, data })
    }
}

pub fn write_matrix(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = [0u8; 16];
    header[0..4].copy_from_slice(MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(m.rows as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(m.cols as u32).to_le_bytes());
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for v in &m.data {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| bad_format(path, "truncated header"))?;
    if &header[0..4] != MAGIC {
        return Err(bad_format(path, "bad magic"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(bad_format(path, &format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; rows * cols * 8];
    r.read_exact(&mut payload)
        .map_err(|_| bad_format(path, "truncated payload"))?;
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

/// Debug-friendly CSV export: one row per line, values via `{:?}` formatting
/// so the dump round-trips through a float parser losslessly.
pub fn write_matrix_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.data.chunks_exact(m.cols.max(1)) {
        let line = row
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn bad_format(path: &Path, message: &str) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}
