//! Plain-text CSV and `key=value` sidecar helpers shared by every module.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Formats a double with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_row(values: &[f64]) -> String {
    let mut line = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&fmt_f64(*v));
    }
    line
}

/// Writes a header plus numeric rows with LF line endings.
pub fn write_csv<W: Write>(mut out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", csv_row(&row))?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(file, header, rows)
}

/// Reads a numeric CSV whose header must match `header` exactly.
pub fn read_csv<R: BufRead>(input: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = input.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))??;
    let got: Vec<&str> = first.trim().split(',').map(str::trim).collect();
    if got != header {
        return Err(Error::Parse(format!(
            "expected header `{}`, found `{}`",
            header.join(","),
            first.trim()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: `{}`: {e}", lineno + 2, tok.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, found {}",
                lineno + 2,
                header.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv_file(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_csv(file, header)
}

/// Renders `key=value` lines in the given order.
pub fn sidecar(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        let _ = writeln!(s, "{k}={v}");
    }
    s
}
