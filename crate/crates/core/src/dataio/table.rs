use std::io::Write;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

/// Columns to read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub time_col: String,
    pub columns: Vec<String>,
}

/// Time-indexed table of optional floats, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub time_name: String,
    /// Strictly increasing; integer times verbatim, ISO-8601 as Unix seconds.
    pub time: Vec<i64>,
    pub columns: Vec<String>,
    /// `data[col][row]`; `None` marks a missing cell.
    pub data: Vec<Vec<Option<f64>>>,
}

impl RawTable {
    /// Builds a table from dense columns; `time` defaults to `0..n`.
    pub fn from_columns(time_name: &str, time: Option<Vec<i64>>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::Format("columns have different lengths".into()));
        }
        let time = time.unwrap_or_else(|| (0..n as i64).collect());
        if time.len() != n {
            return Err(Error::Format("time column length differs from data".into()));
        }
        let table = RawTable {
            time_name: time_name.to_string(),
            time,
            columns: columns.iter().map(|c| c.0.clone()).collect(),
            data: columns.into_iter().map(|c| c.1.into_iter().map(Some).collect()).collect(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("column `{name}` not in table")))
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        Ok(&self.data[self.column_index(name)?])
    }

    pub fn missing_count(&self) -> usize {
        self.data.iter().flatten().filter(|v| v.is_none()).count()
    }

    /// Copies rows `start..end`.
    pub fn rows(&self, start: usize, end: usize) -> RawTable {
        RawTable {
            time_name: self.time_name.clone(),
            time: self.time[start..end].to_vec(),
            columns: self.columns.clone(),
            data: self.data.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }

    /// Dense `n x k` matrix of the named columns; fails on missing cells.
    pub fn dense(&self, names: &[String]) -> Result<crate::numgraph::Matrix> {
        let idx = names.iter().map(|n| self.column_index(n)).collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.len() * idx.len());
        for row in 0..self.len() {
            for &c in &idx {
                data.push(self.data[c][row].ok_or_else(|| {
                    Error::Data(format!("missing value in `{}` at row {row}", self.columns[c]))
                })?);
            }
        }
        crate::numgraph::Matrix::from_vec(self.len(), idx.len(), data)
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Format("table needs at least one value column".into()));
        }
        if let Some(i) = self.time.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Format(format!(
                "time column `{}` is not strictly increasing at row {}",
                self.time_name,
                i + 1
            )));
        }
        Ok(())
    }

    /// Writes the table as CSV with the time column first; missing cells stay empty.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(&mut w);
        let mut header = vec![self.time_name.clone()];
        header.extend(self.columns.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for row in 0..self.len() {
            let mut rec = vec![self.time[row].to_string()];
            for col in &self.data {
                rec.push(col[row].map(|v| format!("{v:?}")).unwrap_or_default());
            }
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn parse_time(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Reads a headed, comma-separated UTF-8 file.
///
/// Empty cells become missing markers. Row numbers in errors are 1-based
/// data rows (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, schema)
}

pub(crate) fn read_csv(reader: impl std::io::Read, schema: &CsvSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("header lacks declared column `{name}`")))
    };
    let time_idx = find(&schema.time_col)?;
    let col_idx = schema.columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut time = Vec::new();
    let mut data: Vec<Vec<Option<f64>>> = vec![Vec::new(); col_idx.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = r + 1;
        let cell = |i: usize| rec.get(i).unwrap_or("").trim();
        let t = parse_time(cell(time_idx)).ok_or_else(|| {
            Error::Format(format!("row {row}, column `{}`: unparseable time `{}`", schema.time_col, cell(time_idx)))
        })?;
        time.push(t);
        for (k, &ci) in col_idx.iter().enumerate() {
            let s = cell(ci);
            let v = if s.is_empty() {
                None
            } else {
                Some(s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Format(format!("row {row}, column `{}`: unparseable value `{s}`", schema.columns[k]))
                })?)
            };
            data[k].push(v);
        }
    }
    let table = RawTable {
        time_name: schema.time_col.clone(),
        time,
        columns: schema.columns.clone(),
        data,
    };
    table.validate()?;
    Ok(table)
}
