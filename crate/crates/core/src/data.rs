//! Row-aligned named numeric columns and their CSV representation.
//!
//! The CSV schema is deliberately strict: a header row is required, columns
//! are addressed by name, cells use `.` as the decimal separator and empty
//! cells are rejected.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of rows; zero for a dataset without columns.
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Appends a column. Names must be unique and lengths must agree with
    /// the columns already present.
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Input("column name must not be empty".into()));
        }
        if self.contains(&name) {
            return Err(Error::Input(format!("duplicate column `{name}`")));
        }
        if !self.columns.is_empty() && values.len() != self.n_rows() {
            return Err(Error::Input(format!(
                "column `{name}` has {} rows, expected {}",
                values.len(),
                self.n_rows()
            )));
        }
        self.columns.push(Column { name, values });
        Ok(())
    }

    pub fn with_column(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.push(name, values)?;
        Ok(self)
    }

    /// Replaces the values of an existing column or appends a new one.
    pub fn set(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if let Some(pos) = self.columns.iter().position(|c| c.name == name) {
            if values.len() != self.n_rows() {
                return Err(Error::Input(format!(
                    "column `{name}` has {} rows, expected {}",
                    values.len(),
                    self.n_rows()
                )));
            }
            self.columns[pos].values = values;
            Ok(())
        } else {
            self.push(name, values)
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Reads a dataset from CSV text.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_error(0, "<header>", e))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::Csv {
                row: 0,
                column: "<header>".into(),
                reason: "missing header row".into(),
            });
        }
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (i, record) in rdr.records().enumerate() {
            // Row numbers are 1-based and count the header as row 1.
            let row = i + 2;
            let record = record.map_err(|e| csv_error(row, "<record>", e))?;
            if record.len() != headers.len() {
                return Err(Error::Csv {
                    row,
                    column: "<record>".into(),
                    reason: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::Csv {
                        row,
                        column: headers[j].clone(),
                        reason: "empty cell (missing values are not supported)".into(),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| Error::Csv {
                    row,
                    column: headers[j].clone(),
                    reason: format!("non-numeric value `{cell}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv {
                        row,
                        column: headers[j].clone(),
                        reason: format!("non-finite value `{cell}`"),
                    });
                }
                values[j].push(v);
            }
        }
        let mut ds = Dataset::new();
        for (name, col) in headers.into_iter().zip(values) {
            ds.push(name, col)?;
        }
        Ok(ds)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the dataset as CSV. Values use Rust's shortest round-trip
    /// representation, so writing the same data twice is byte-identical.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.names())
            .map_err(|e| Error::Io(e.to_string()))?;
        let mut buf = Vec::with_capacity(self.n_cols());
        for i in 0..self.n_rows() {
            buf.clear();
            buf.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            wtr.write_record(&buf).map_err(|e| Error::Io(e.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_error(row: usize, column: &str, e: csv::Error) -> Error {
    let row = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(row);
    Error::Csv {
        row,
        column: column.to_string(),
        reason: e.to_string(),
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub(crate) fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() - 1) as f64).sqrt()
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    let s = std_dev(x);
    s * s
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}
