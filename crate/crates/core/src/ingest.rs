//! CSV input. Wide files hold one sample per column with the labels in the
//! header and blank cells allowed at the bottom of shorter columns. Long
//! files hold `label,value` rows. Lines starting with `#` are comments.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sample::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Wide,
    Long,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wide" => Ok(InputFormat::Wide),
            "long" => Ok(InputFormat::Long),
            other => Err(format!("unknown input format '{other}' (expected wide or long)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// `line` is the 1-based line in the file, `column` the 1-based field.
    #[error("line {line}, column {column}: {message}")]
    ParseError { line: usize, column: usize, message: String },
    #[error("column '{0}' has no values")]
    EmptyColumn(String),
    #[error("no data found")]
    NoData,
}

/// Reads `path` in the given format.
pub fn ingest(path: impl AsRef<Path>, format: InputFormat) -> Result<Vec<Series>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    from_reader(file, format)
}

pub fn from_reader<R: Read>(reader: R, format: InputFormat) -> Result<Vec<Series>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IngestError::ParseError { line, column: 0, message: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect::<Vec<_>>()));
    }
    match format {
        InputFormat::Wide => wide(rows),
        InputFormat::Long => long(rows),
    }
}

fn parse_value(cell: &str, line: usize, column: usize) -> Result<f64, IngestError> {
    let v: f64 = cell.parse().map_err(|_| IngestError::ParseError {
        line,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::ParseError { line, column, message: format!("'{cell}' is not finite") });
    }
    Ok(v)
}

fn wide(rows: Vec<(usize, Vec<String>)>) -> Result<Vec<Series>, IngestError> {
    let mut it = rows.into_iter();
    let (_, header) = it.next().ok_or(IngestError::NoData)?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    // a blank cell ends its column; later values would break alignment
    let mut ended = vec![false; header.len()];
    for (line, cells) in it {
        if cells.len() > header.len() {
            return Err(IngestError::ParseError {
                line,
                column: header.len() + 1,
                message: format!("{} fields but the header has {}", cells.len(), header.len()),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                ended[j] = true;
                continue;
            }
            if ended[j] {
                return Err(IngestError::ParseError {
                    line,
                    column: j + 1,
                    message: "value after a blank cell in the same column".into(),
                });
            }
            columns[j].push(parse_value(cell, line, j + 1)?);
        }
        for flag in ended.iter_mut().skip(cells.len()) {
            *flag = true;
        }
    }
    header
        .into_iter()
        .zip(columns)
        .enumerate()
        .map(|(j, (label, values))| {
            let label = if label.is_empty() { format!("sample{}", j + 1) } else { label };
            if values.is_empty() {
                Err(IngestError::EmptyColumn(label))
            } else {
                Ok(Series::new(label, values))
            }
        })
        .collect()
}

fn long(rows: Vec<(usize, Vec<String>)>) -> Result<Vec<Series>, IngestError> {
    let mut out: Vec<Series> = Vec::new();
    let mut rows = rows.into_iter().peekable();
    // optional header
    if let Some((_, first)) = rows.peek() {
        if first.len() == 2 && first[1].parse::<f64>().is_err() && first[1].eq_ignore_ascii_case("value") {
            rows.next();
        }
    }
    for (line, cells) in rows {
        if cells.len() != 2 {
            return Err(IngestError::ParseError {
                line,
                column: cells.len().min(3),
                message: format!("expected 'label,value', found {} fields", cells.len()),
            });
        }
        if cells[0].is_empty() {
            return Err(IngestError::ParseError { line, column: 1, message: "empty label".into() });
        }
        let v = parse_value(&cells[1], line, 2)?;
        match out.iter_mut().find(|s| s.label == cells[0]) {
            Some(s) => s.values.push(v),
            None => out.push(Series::new(cells[0].clone(), vec![v])),
        }
    }
    if out.is_empty() {
        return Err(IngestError::NoData);
    }
    Ok(out)
}
