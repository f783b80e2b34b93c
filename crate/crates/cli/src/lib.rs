//! CSV ingestion with min-max rescaling into the unit cube.

use std::path::Path;

use dpcert::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Core(#[from] dpcert::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// A numeric table with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Per-column affine map onto `[0, 1]`. Columns with `max = min` map to 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaling {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn format_err(path: &Path, message: impl Into<String>) -> IngestError {
    IngestError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: path.display().to_string(),
                source,
            },
            other => format_err(path, format!("{other:?}")),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(format_err(path, "missing header row"));
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        // data rows start on line 2
        let line = r + 2;
        if record.len() != headers.len() {
            return Err(format_err(
                path,
                format!("row {line} has {} fields, header has {}", record.len(), headers.len()),
            ));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format_err(
                    path,
                    format!("row {line}, column {} ({}): {cell:?} is not a finite number", c + 1, headers[c]),
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_err(path, "no data rows"));
    }
    Ok(Table { headers, rows })
}

pub fn write_table(path: &Path, headers: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let io = |e: csv::Error| format_err(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(headers).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ColumnScaling {
    /// Ranges observed on the rows of one or more tables.
    pub fn observe<'a>(rows: impl IntoIterator<Item = &'a Vec<f64>>, dim: usize) -> Self {
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        ColumnScaling { min, max }
    }

    /// Bounds from a CSV with columns `column,min,max` (one line per data
    /// column, in order).
    pub fn from_bounds_file(path: &Path, headers: &[String]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| format_err(path, e.to_string()))?;
        let mut min = Vec::new();
        let mut max = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| format_err(path, e.to_string()))?;
            let line = r + 2;
            if record.len() != 3 {
                return Err(format_err(path, format!("row {line}: expected column,min,max")));
            }
            let name = &record[0];
            if headers.get(r).map(String::as_str) != Some(name) {
                return Err(format_err(path, format!("row {line}: bound for {name:?} is out of column order")));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format_err(path, format!("row {line}: {s:?} is not a finite number")))
            };
            let (lo, hi) = (parse(&record[1])?, parse(&record[2])?);
            if lo > hi {
                return Err(format_err(path, format!("row {line}: min exceeds max")));
            }
            min.push(lo);
            max.push(hi);
        }
        if min.len() != headers.len() {
            return Err(format_err(
                path,
                format!("{} bounds for {} columns", min.len(), headers.len()),
            ));
        }
        Ok(ColumnScaling { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Maps a row into the cube; values outside the ranges are clamped.
    pub fn scale(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let (lo, hi) = (self.min[j], self.max[j]);
                if hi > lo {
                    ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect()
    }

    pub fn unscale(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &u)| {
                let (lo, hi) = (self.min[j], self.max[j]);
                if hi > lo {
                    lo + u * (hi - lo)
                } else {
                    lo
                }
            })
            .collect()
    }

    /// Rows outside the ranges, as `(row, column)` of the first offender.
    pub fn first_outside(&self, rows: &[Vec<f64>]) -> Option<(usize, usize)> {
        rows.iter().enumerate().find_map(|(i, row)| {
            row.iter()
                .enumerate()
                .find(|(j, &v)| v < self.min[*j] || v > self.max[*j])
                .map(|(j, _)| (i, j))
        })
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Result<Dataset> {
        Ok(Dataset::new(rows.iter().map(|r| self.scale(r)).collect())?)
    }
}

/// Reads a CSV and rescales every column by its own range.
pub fn load_csv(path: &Path) -> Result<(Dataset, ColumnScaling, Vec<String>)> {
    let table = read_table(path)?;
    let scaling = ColumnScaling::observe(&table.rows, table.headers.len());
    Ok((scaling.apply(&table.rows)?, scaling, table.headers))
}
