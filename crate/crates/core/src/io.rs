//! CSV and JSON artifacts.
//!
//! Floats are written with Rust's shortest round-trip formatting, which
//! preserves all 17 significant digits needed to reproduce the value.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serde adapter storing a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m
            .row_iter()
            .map(|r| r.iter().cloned().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
    }
}

/// Minimal CSV table builder.
#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

pub fn fmt_f64(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").expect("formatting into a String");
    s
}

/// CSV with header `t, <prefix>_1 .. <prefix>_d` from a d × n matrix.
pub fn series_csv(columns: &DMatrix<f64>, prefix: &str) -> CsvTable {
    let d = columns.nrows();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("{prefix}_{i}")));
    let mut table = CsvTable::new(&header);
    for t in 0..columns.ncols() {
        let mut row = vec![t.to_string()];
        row.extend(columns.column(t).iter().map(|v| fmt_f64(*v)));
        table.push(row);
    }
    table
}

/// Parse a `t, x_1 .. x_p` CSV back into a p × T matrix.
pub fn read_series_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_series_csv(&text)
}

pub fn parse_series_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?;
    let p = header.split(',').count().saturating_sub(1);
    if p == 0 {
        return Err(Error::Config("CSV has no data columns".into()));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 1 {
            return Err(Error::Config(format!("CSV row {} has {} fields", i + 2, fields.len())));
        }
        for f in &fields[1..] {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("CSV row {}: bad number {f:?}", i + 2)))?;
            data.push(v);
        }
        n += 1;
    }
    // data is row-major n × p; the caller wants p × n
    Ok(DMatrix::from_row_slice(n, p, &data).transpose())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
