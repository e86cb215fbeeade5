//! Matrix CSV files and the float format shared by every CSV this crate writes.
//!
//! A matrix file holds one matrix row per line, columns are samples. An
//! optional first line `# d=<d> n=<n>` declares the shape and is checked
//! against the data.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::subspace::DataMatrix;

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros dropped,
/// scientific notation when the decimal exponent is below −4 or at least 12.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV writer with LF line endings.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub(crate) fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

pub(crate) fn parse_cell<T: Real>(cell: &str, line: usize) -> Result<T> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, message: format!("non-finite value {cell:?}") });
    }
    Ok(T::lit(v))
}

fn parse_shape_header(line: &str) -> Option<(usize, usize)> {
    let rest = line.trim().strip_prefix('#')?;
    let mut d = None;
    let mut n = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("d", v)) => d = v.parse().ok(),
            Some(("n", v)) => n = v.parse().ok(),
            _ => return None,
        }
    }
    Some((d?, n?))
}

pub fn parse_matrix_csv<T: Real>(text: &str) -> Result<DataMatrix<T>> {
    let first = text.lines().next().unwrap_or("");
    let declared = if first.trim_start().starts_with('#') {
        Some(parse_shape_header(first).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("malformed shape header {first:?}, expected '# d=<d> n=<n>'"),
        })?)
    } else {
        None
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data: Vec<T> = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {c} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        for cell in record.iter() {
            data.push(parse_cell(cell, line)?);
        }
        rows += 1;
    }
    let cols = cols.ok_or(Error::Parse { line: 1, message: "no matrix rows".into() })?;
    if let Some((d, n)) = declared {
        if (d, n) != (rows, cols) {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {d}x{n}, data is {rows}x{cols}"),
            });
        }
    }
    DataMatrix::from_row_slice(rows, cols, &data)
}

pub fn read_matrix_csv<T: Real>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn matrix_to_csv<T: Real>(m: &DMatrix<T>) -> String {
    let mut out = format!("# d={} n={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_float(m[(i, j)].as_f64())).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv<T: Real>(path: impl AsRef<Path>, m: &DMatrix<T>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}
