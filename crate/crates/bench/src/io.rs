//! Matrix files.
//!
//! Two formats are accepted, told apart by the first four bytes:
//!
//! * text: a `rows,cols` header line, then `rows` lines of `cols`
//!   comma-separated decimals;
//! * binary: `FMBS`, version byte `1`, rows and cols as little-endian `u64`,
//!   then `rows·cols` little-endian `f64` values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use fmbs_core::Matrix;

use crate::error::{BenchError, Result};

pub const MAGIC: &[u8; 4] = b"FMBS";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.bin` and `.fmbs` files are binary; everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin" | "fmbs") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    let bytes =
        fs::read(path).map_err(|e| BenchError::io(format!("reading {}", path.display()), e))?;
    if bytes.starts_with(MAGIC) {
        decode_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| BenchError::Parse {
            path: path.to_owned(),
            location: format!("byte {}", e.utf8_error().valid_up_to()),
            message: "not valid UTF-8 text and no FMBS magic".into(),
        })?;
        parse_csv(path, &text)
    }
}

pub fn save_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    let bytes = match format {
        MatrixFormat::Binary => encode_binary(m),
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
    };
    let mut f = fs::File::create(path)
        .map_err(|e| BenchError::io(format!("creating {}", path.display()), e))?;
    f.write_all(&bytes)
        .map_err(|e| BenchError::io(format!("writing {}", path.display()), e))
}

pub fn encode_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_csv(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> BenchError {
    BenchError::Parse {
        path: path.to_owned(),
        location,
        message: message.into(),
    }
}

fn dim_err(path: &Path, message: impl Into<String>) -> BenchError {
    BenchError::Dimension {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn check_finite(path: &Path, m: &Matrix) -> Result<()> {
    match m.first_non_finite() {
        Some((i, j, v)) => Err(parse_err(
            path,
            format!("entry ({i}, {j})"),
            format!("non-finite value {v}"),
        )),
        None => Ok(()),
    }
}

pub fn decode_binary(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(
            path,
            "header".into(),
            format!(
                "truncated header: expected {HEADER_LEN} bytes, got {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err(path, "offset 0".into(), "missing FMBS magic"));
    }
    if bytes[4] != VERSION {
        return Err(parse_err(
            path,
            "offset 4".into(),
            format!("unsupported version {}", bytes[4]),
        ));
    }
    let read_u64 = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (rows, cols) = (read_u64(5), read_u64(13));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| dim_err(path, format!("{rows}x{cols} overflows")))?;
    if bytes.len() as u64 != expected {
        return Err(parse_err(
            path,
            format!("offset {}", bytes.len().min(expected as usize)),
            format!(
                "payload size mismatch: expected {expected} bytes for {rows}x{cols}, got {}",
                bytes.len()
            ),
        ));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let m = Matrix::new(rows as usize, cols as usize, data)
        .map_err(|e| dim_err(path, e.to_string()))?;
    check_finite(path, &m)?;
    Ok(m)
}

pub fn parse_csv(path: &Path, text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, "line 1".into(), "empty file"))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| {
            parse_err(
                path,
                format!("line {}", hline + 1),
                format!("header must be `rows,cols`, got `{header}`"),
            )
        })
    };
    if dims.len() != 2 {
        return Err(parse_err(
            path,
            format!("line {}", hline + 1),
            format!("header must be `rows,cols`, got `{header}`"),
        ));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if rows == 0 || cols == 0 {
        return Err(dim_err(path, format!("header declares {rows}x{cols}")));
    }

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        if seen == rows {
            return Err(dim_err(
                path,
                format!("line {}: more than the {rows} rows declared", lineno + 1),
            ));
        }
        let before = data.len();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {}, column {}", lineno + 1, col + 1),
                    format!("`{}` is not a number", field.trim()),
                )
            })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(dim_err(
                path,
                format!(
                    "line {}: {} values, header declares {cols}",
                    lineno + 1,
                    data.len() - before
                ),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(dim_err(
            path,
            format!("{seen} rows present, header declares {rows}"),
        ));
    }
    let m = Matrix::new(rows, cols, data).map_err(|e| dim_err(path, e.to_string()))?;
    check_finite(path, &m)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("m.csv")
    }

    #[test]
    fn csv_identity() {
        let m = parse_csv(p(), "2,2\n1,0\n0,1\n").unwrap();
        assert_eq!(m, Matrix::identity(2));
        // trailing blank lines and CRLF are fine
        let m = parse_csv(p(), "2,2\r\n1, 0\r\n0,1\r\n\r\n").unwrap();
        assert_eq!(m, Matrix::identity(2));
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv(p(), ""), Err(BenchError::Parse { .. })));
        assert!(matches!(
            parse_csv(p(), "2;2\n"),
            Err(BenchError::Parse { .. })
        ));
        let err = parse_csv(p(), "2,2\n1,0\n0,x\n").unwrap_err();
        assert!(err.to_string().contains("line 3, column 2"), "{err}");
        assert!(matches!(
            parse_csv(p(), "2,2\n1,0\n"),
            Err(BenchError::Dimension { .. })
        ));
        assert!(matches!(
            parse_csv(p(), "2,2\n1,0\n0,1,2\n"),
            Err(BenchError::Dimension { .. })
        ));
        assert!(matches!(
            parse_csv(p(), "1,2\n1,0\n0,1\n"),
            Err(BenchError::Dimension { .. })
        ));
        assert!(matches!(
            parse_csv(p(), "1,2\n1,NaN\n"),
            Err(BenchError::Parse { .. })
        ));
    }

    #[test]
    fn truncated_binary_names_byte_counts() {
        let bytes = encode_binary(&Matrix::identity(3));
        let err = decode_binary(Path::new("m.bin"), &bytes[..bytes.len() - 5]).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, BenchError::Parse { .. }));
        assert!(
            msg.contains("expected 93 bytes") && msg.contains("got 88"),
            "{msg}"
        );

        let err = decode_binary(Path::new("m.bin"), &bytes[..10]).unwrap_err();
        assert!(err.to_string().contains("truncated header"));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode_binary(Path::new("m.bin"), &bad).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            MatrixFormat::from_path(Path::new("a.bin")),
            MatrixFormat::Binary
        );
        assert_eq!(
            MatrixFormat::from_path(Path::new("a.fmbs")),
            MatrixFormat::Binary
        );
        assert_eq!(
            MatrixFormat::from_path(Path::new("a.csv")),
            MatrixFormat::Csv
        );
    }

    proptest! {
        #[test]
        fn both_formats_round_trip(rows in 1usize..6, cols in 1usize..6,
                                   vals in prop::collection::vec(-1e300f64..1e300, 36)) {
            let m = Matrix::new(rows, cols, vals[..rows * cols].to_vec()).unwrap();
            let bin = decode_binary(Path::new("x.bin"), &encode_binary(&m)).unwrap();
            prop_assert_eq!(&bin, &m);
            let csv = parse_csv(p(), &encode_csv(&m)).unwrap();
            prop_assert_eq!(&csv, &m);
        }
    }
}
