//! Dense matrix files. CMAT v1: a `cmat <rows> <cols> <complex|real>` header
//! followed by row-major entries, complex ones as `<re> <im>` pairs, written
//! with 17 significant digits. The reader also accepts MatrixMarket `array`
//! files (column-major), recognized by their `%%MatrixMarket` banner.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{Matrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad number '{tok}'")))
}

fn parse_count(tok: Option<&str>, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?;
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad {what} '{tok}'")))
}

fn read_values(tokens: &mut dyn Iterator<Item = &str>, count: usize, field: Field) -> Result<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let re = parse_f64(tokens.next().ok_or_else(|| Error::Parse("too few entries".into()))?)?;
        let im = match field {
            Field::Real => 0.0,
            Field::Complex => {
                parse_f64(tokens.next().ok_or_else(|| Error::Parse("too few entries".into()))?)?
            }
        };
        out.push(C64::new(re, im));
    }
    if tokens.next().is_some() {
        return Err(Error::Parse("trailing entries after matrix data".into()));
    }
    Ok(out)
}

fn parse_cmat(text: &str) -> Result<Matrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
    let mut h = header.split_whitespace();
    if h.next() != Some("cmat") {
        return Err(Error::Parse(format!("bad header '{header}'")));
    }
    let rows = parse_count(h.next(), "row count")?;
    let cols = parse_count(h.next(), "column count")?;
    let field = match h.next() {
        Some("real") => Field::Real,
        Some("complex") => Field::Complex,
        other => return Err(Error::Parse(format!("bad field {other:?}"))),
    };
    if h.next().is_some() {
        return Err(Error::Parse(format!("bad header '{header}'")));
    }
    let mut tokens = lines.flat_map(str::split_whitespace);
    let data = read_values(&mut tokens, rows * cols, field)?;
    Matrix::from_row_major(rows, cols, &data)
}

fn parse_matrix_market(text: &str) -> Result<Matrix> {
    let mut lines = text.lines();
    let banner = lines.next().unwrap_or_default().to_ascii_lowercase();
    let words: Vec<&str> = banner.split_whitespace().collect();
    if words.len() < 5 || words[1] != "matrix" || words[2] != "array" {
        return Err(Error::Parse(format!("unsupported MatrixMarket banner '{banner}'")));
    }
    let field = match words[3] {
        "real" | "integer" | "double" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(Error::Parse(format!("unsupported field '{other}'"))),
    };
    if words[4] != "general" {
        return Err(Error::Parse(format!("unsupported symmetry '{}'", words[4])));
    }
    let mut body = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
    let mut s = size.split_whitespace();
    let rows = parse_count(s.next(), "row count")?;
    let cols = parse_count(s.next(), "column count")?;
    let mut tokens = body.flat_map(str::split_whitespace);
    let data = read_values(&mut tokens, rows * cols, field)?;
    Matrix::from_col_major(rows, cols, data)
}

/// Parses CMAT v1 or MatrixMarket array text.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    if text.starts_with("%%MatrixMarket") {
        parse_matrix_market(text)
    } else {
        parse_cmat(text)
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

fn push_f64(out: &mut String, x: f64) {
    // 17 significant digits round-trip every finite double
    let _ = write!(out, "{x:.16e}");
}

/// CMAT v1 text; `real` when every imaginary part is zero.
pub fn format_cmat(a: &Matrix) -> String {
    let real = a.is_real();
    let (rows, cols) = a.shape();
    let mut out = format!("cmat {rows} {cols} {}\n", if real { "real" } else { "complex" });
    for i in 0..rows {
        for j in 0..cols {
            if j > 0 {
                out.push(' ');
            }
            let z = a[(i, j)];
            push_f64(&mut out, z.re);
            if !real {
                out.push(' ');
                push_f64(&mut out, z.im);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, a: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_cmat(a)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes a real vector as an `n x 1` CMAT file.
pub fn write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    let m = Matrix::from_fn(v.len(), 1, |i, _| C64::new(v[i], 0.0));
    write_matrix(path, &m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trip() {
        let a = Matrix::from_real_rows(&[&[0.1, -2.0 / 3.0], &[1e-300, f64::MAX]]);
        let text = format_cmat(&a);
        assert!(text.starts_with("cmat 2 2 real\n"));
        assert_eq!(parse_matrix(&text).unwrap(), a);
    }

    #[test]
    fn complex_round_trip() {
        let a = Matrix::from_fn(3, 2, |i, j| C64::new(1.0 / (i + 1) as f64, -(j as f64) / 7.0 + 1e-17));
        assert_eq!(parse_matrix(&format_cmat(&a)).unwrap(), a);
    }

    #[test]
    fn row_major_order() {
        let a = parse_matrix("cmat 2 3 real\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(a[(0, 2)], C64::new(3.0, 0.0));
        assert_eq!(a[(1, 0)], C64::new(4.0, 0.0));
    }

    #[test]
    fn matrix_market_is_column_major() {
        let text = "%%MatrixMarket matrix array real general\n% comment\n2 3\n1\n4\n2\n5\n3\n6\n";
        let a = parse_matrix(text).unwrap();
        assert_eq!(a, parse_matrix("cmat 2 3 real\n1 2 3\n4 5 6\n").unwrap());
        let z = parse_matrix("%%MatrixMarket matrix array complex general\n1 1\n1.5 -2\n").unwrap();
        assert_eq!(z[(0, 0)], C64::new(1.5, -2.0));
    }

    #[test]
    fn malformed() {
        for text in [
            "",
            "cmat 2 2\n1 2 3 4",
            "matrix 1 1 real\n1",
            "cmat 2 2 real\n1 2 3",
            "cmat 1 1 real\n1 2",
            "cmat 1 1 real\nx",
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n",
        ] {
            assert!(matches!(parse_matrix(text), Err(Error::Parse(_))), "{text:?}");
        }
    }
}
