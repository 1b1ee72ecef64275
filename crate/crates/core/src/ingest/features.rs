//! Binary feature-matrix files.
//!
//! Layout (all little-endian):
//!
//! | offset | size | field                                  |
//! |--------|------|----------------------------------------|
//! | 0      | 4    | magic `SRFV`                           |
//! | 4      | 2    | format version, `1`                    |
//! | 6      | 2    | flags, bit 0 set = 64-bit values       |
//! | 8      | 4    | rows                                   |
//! | 12     | 4    | cols                                   |
//! | 16     | ...  | rows*cols IEEE-754 values, row-major   |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::FragmentMatrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"SRFV";
pub const FEATURE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
const FLAG_F64: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
    /// 32-bit when every value survives the narrowing exactly, else 64-bit.
    Auto,
}

impl Precision {
    fn resolve(self, m: &FragmentMatrix) -> Precision {
        match self {
            Precision::Auto => {
                let exact = m
                    .as_slice()
                    .iter()
                    .all(|&v| (v as f32) as f64 == v && (v as f32).is_finite());
                if exact {
                    Precision::F32
                } else {
                    Precision::F64
                }
            }
            p => p,
        }
    }
}

/// Serialize `m` into the feature file format.
pub fn encode_features(m: &FragmentMatrix, precision: Precision) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Shape(format!(
            "feature matrix must be at least 1x1, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Shape("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Shape("too many columns".into()))?;
    let precision = precision.resolve(m);
    let width = if precision == Precision::F64 { 8 } else { 4 };

    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * width);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    let flags = if precision == Precision::F64 {
        FLAG_F64
    } else {
        0
    };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &v in m.as_slice() {
        if precision == Precision::F64 {
            out.extend_from_slice(&v.to_le_bytes());
        } else {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse a feature file image. `expected` optionally pins `(rows, cols)`.
pub fn decode_features(
    bytes: &[u8],
    expected: (Option<usize>, Option<usize>),
    context: &str,
) -> Result<FragmentMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(
            context,
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::parse(context, "bad magic, expected SRFV"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(Error::parse(
            context,
            format!("unsupported version {version}"),
        ));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    if flags & !FLAG_F64 != 0 {
        return Err(Error::parse(context, format!("unknown flags {flags:#06x}")));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!(
            "{context}: empty matrix {rows}x{cols}"
        )));
    }
    if let Some(er) = expected.0 {
        if er != rows {
            return Err(Error::Shape(format!(
                "{context}: header has {rows} rows, expected {er}"
            )));
        }
    }
    if let Some(ec) = expected.1 {
        if ec != cols {
            return Err(Error::Shape(format!(
                "{context}: header has {cols} columns, expected {ec}"
            )));
        }
    }

    let width = if flags & FLAG_F64 != 0 { 8 } else { 4 };
    let payload = &bytes[HEADER_LEN..];
    let want = rows * cols;
    if payload.len() != want * width {
        let found = payload.len() / width;
        let kind = if payload.len() < want * width {
            "truncated payload"
        } else {
            "trailing bytes after payload"
        };
        return Err(Error::parse(
            context,
            format!(
                "{kind}: expected {want} values, found {found} ({} bytes)",
                payload.len()
            ),
        ));
    }
    let data: Vec<f64> = if width == 8 {
        payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    } else {
        payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()
    };
    let m = FragmentMatrix::from_vec(rows, cols, data)?;
    if let Some((row, col)) = m.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(m)
}

/// Write `m` to `path`, choosing 32-bit storage whenever it is lossless.
pub fn write_features(m: &FragmentMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_features_with(m, path, Precision::Auto)
}

pub fn write_features_with(
    m: &FragmentMatrix,
    path: impl AsRef<Path>,
    precision: Precision,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_features(m, precision)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_features(
    path: impl AsRef<Path>,
    expected_rows: Option<usize>,
    expected_cols: Option<usize>,
) -> Result<FragmentMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(
        &bytes,
        (expected_rows, expected_cols),
        &path.display().to_string(),
    )
}
