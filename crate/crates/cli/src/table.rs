//! Comma-separated numeric tables with a header row.

use std::fs::File;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> CliResult<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| CliError::Parse(format!("no column named {name}")))
    }

    /// Columns in the order of `names`.
    pub fn select(&self, names: &[String]) -> CliResult<Vec<Vec<f64>>> {
        names.iter().map(|n| self.column(n).map(<[f64]>::to_vec)).collect()
    }
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bad = |e: csv::Error| CliError::Parse(format!("{}: {e}", path.display()));
    let names: Vec<String> = reader.headers().map_err(bad)?.iter().map(str::to_string).collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(bad)?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Parse(format!(
                    "{}: row {} column {}: not a number: {field:?}",
                    path.display(),
                    row + 1,
                    names[col]
                ))
            })?;
            columns[col].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(Table { names, columns })
}

pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(path: &Path, names: &[String], columns: &[Vec<f64>]) -> CliResult<()> {
    let rows = columns.first().map_or(0, Vec::len);
    let mut out = writer(path)?;
    write_row(&mut out, names.iter().map(String::as_str), path)?;
    for t in 0..rows {
        let fields: Vec<String> = columns.iter().map(|c| format_number(c[t])).collect();
        write_row(&mut out, fields.iter().map(String::as_str), path)?;
    }
    out.flush().map_err(|e| io_error(path, e))
}

pub(crate) fn writer(path: &Path) -> CliResult<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub(crate) fn write_row<'a>(
    out: &mut csv::Writer<File>,
    fields: impl IntoIterator<Item = &'a str>,
    path: &Path,
) -> CliResult<()> {
    out.write_record(fields).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}
