//! Small CSV helpers shared by the file formats: fixed headers, LF line
//! endings, 17-digit floats and line-numbered parse errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, ParseErrorKind, Result};
use crate::numfmt::f64_17;

pub(crate) struct Table {
    /// (1-based line number, record)
    pub rows: Vec<(usize, csv::StringRecord)>,
}

pub(crate) fn read_table(path: &Path, header: &[&str]) -> Result<Table> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, ParseErrorKind::Malformed(e.to_string()))
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if !saw_header {
            let got: Vec<&str> = rec.iter().collect();
            if got != header {
                return Err(Error::parse(
                    path,
                    line,
                    ParseErrorKind::Malformed(format!("expected header `{}`", header.join(","))),
                ));
            }
            saw_header = true;
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::parse(
                path,
                line,
                ParseErrorKind::Malformed(format!("expected {} fields, found {}", header.len(), rec.len())),
            ));
        }
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, ParseErrorKind::Empty));
    }
    Ok(Table { rows })
}

pub(crate) fn f64_field(path: &Path, line: usize, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = rec[idx].trim();
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(path, line, ParseErrorKind::Malformed(format!("`{raw}` in `{name}` is not a number"))))?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, ParseErrorKind::NonFinite(name.to_string())));
    }
    Ok(v)
}

pub(crate) fn int_field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec[idx].trim();
    raw.parse()
        .map_err(|_| Error::parse(path, line, ParseErrorKind::Malformed(format!("`{raw}` in `{name}` is not an integer"))))
}

/// Rejects time columns that do not strictly increase.
pub(crate) fn check_increasing(path: &Path, times: &[(usize, f64)]) -> Result<()> {
    for w in times.windows(2) {
        if w[1].1 <= w[0].1 {
            return Err(Error::parse(
                path,
                w[1].0,
                ParseErrorKind::NonMonotoneTime { prev: w[0].1, next: w[1].1 },
            ));
        }
    }
    Ok(())
}

pub(crate) enum Cell {
    F(f64),
    U(u64),
    OptU(Option<u64>),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => f64_17(*v),
            Cell::U(v) => v.to_string(),
            Cell::OptU(Some(v)) => v.to_string(),
            Cell::OptU(None) => String::new(),
        }
    }
}

pub(crate) fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}
