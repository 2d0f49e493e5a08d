//! Matrix files.
//!
//! Binary layout (little-endian): magic `GCTC`, version byte `1`, `u32` rows,
//! `u32` cols, then `rows * cols` `f64` values row-major. CSV has one row per
//! line; JSON is an array of row arrays. Readers detect the format from the
//! leading bytes.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"GCTC";
const VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MatrixFormat {
    #[default]
    Binary,
    Csv,
    Json,
}

impl std::str::FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(MatrixFormat::Binary),
            "csv" => Ok(MatrixFormat::Csv),
            "json" => Ok(MatrixFormat::Json),
            other => Err(Error::Format(format!("unknown matrix format {other:?}"))),
        }
    }
}

pub fn write_matrix<W: Write>(m: &Matrix, format: MatrixFormat, mut w: W) -> Result<()> {
    match format {
        MatrixFormat::Binary => {
            let rows = u32::try_from(m.rows())
                .map_err(|_| Error::Format("too many rows for binary format".into()))?;
            let cols = u32::try_from(m.cols())
                .map_err(|_| Error::Format("too many columns for binary format".into()))?;
            w.write_all(MAGIC)?;
            w.write_all(&[VERSION])?;
            w.write_all(&rows.to_le_bytes())?;
            w.write_all(&cols.to_le_bytes())?;
            for v in m.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        MatrixFormat::Csv => {
            for r in 0..m.rows() {
                let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", line.join(","))?;
            }
        }
        MatrixFormat::Json => {
            serde_json::to_writer(&mut w, &m.to_rows())?;
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Matrix> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        return read_binary(&bytes);
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Format("matrix file is neither binary nor UTF-8 text".into()))?;
    if text.trim_start().starts_with('[') {
        let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
        return Matrix::from_rows(&rows);
    }
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn read_binary(bytes: &[u8]) -> Result<Matrix> {
    const HEADER: usize = 4 + 1 + 4 + 4;
    if bytes.len() < HEADER {
        return Err(Error::Format("truncated binary header".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let body = &bytes[HEADER..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    if body.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} payload bytes for {rows}x{cols}, found {}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Matrix {
        Matrix::from_rows(&[[0.5, -1.25, 3.0], [1e-300, 2.0, -0.0]]).unwrap()
    }

    #[test]
    fn binary_layout_is_exact() {
        let m = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&m, MatrixFormat::Binary, &mut buf).unwrap();
        let mut expected = b"GCTC".to_vec();
        expected.push(1);
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f64.to_le_bytes());
        expected.extend_from_slice(&2.0f64.to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn every_format_reads_back_exactly() {
        for f in [MatrixFormat::Binary, MatrixFormat::Csv, MatrixFormat::Json] {
            let mut buf = Vec::new();
            write_matrix(&sample(), f, &mut buf).unwrap();
            assert_eq!(read_matrix(buf.as_slice()).unwrap(), sample(), "{f:?}");
        }
    }

    #[test]
    fn rejects_truncated_and_ragged() {
        let mut buf = Vec::new();
        write_matrix(&sample(), MatrixFormat::Binary, &mut buf).unwrap();
        buf.pop();
        assert!(read_matrix(buf.as_slice()).is_err());
        assert!(read_matrix("1,2\n3\n".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
    }
}
