//! Trace CSV files.
//!
//! Layout: a `#schema=1` comment line, a header row, then one row per recorded iteration. The first
//! column is the iteration index and must increase. Cells hold finite numbers in Rust's shortest
//! round-trip notation; an empty cell marks a value that does not apply to that row.

use std::io::Write;
use std::path::Path;

use crate::error::{BenchError, Result};

pub const SCHEMA_LINE: &str = "#schema=1";

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    columns: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Trace {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Result<Self> {
        let columns: Vec<String> = columns.into_iter().map(Into::into).collect();
        if columns.is_empty() {
            return Err(BenchError::Trace("a trace needs at least one column".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.is_empty() || c.contains([',', '"', '\n'])) {
            return Err(BenchError::Trace(format!("invalid column name '{c}'")));
        }
        Ok(Self { columns, rows: Vec::new() })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Append a row; NaN becomes an empty cell.
    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        self.push_cells(row.iter().map(|v| if v.is_nan() { None } else { Some(*v) }).collect())
    }

    fn push_cells(&mut self, row: Vec<Option<f64>>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(BenchError::Trace(format!("row has {} cells, trace has {} columns", row.len(), self.columns.len())));
        }
        let Some(Some(index)) = row.first().copied() else {
            return Err(BenchError::Trace("the iteration index cannot be empty".into()));
        };
        if let Some(Some(prev)) = self.rows.last().map(|r| r[0]) {
            if !(index > prev) {
                return Err(BenchError::Trace(format!("iteration index {index} does not increase past {prev}")));
            }
        }
        if let Some((c, v)) = self.columns.iter().zip(&row).find(|(_, v)| v.is_some_and(|x| !x.is_finite())) {
            return Err(BenchError::Trace(format!("non-finite value {} in column {c} at index {index}", v.unwrap())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Values of `column`, or `None` when it does not exist.
    pub fn column(&self, column: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == column)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn last(&self, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.last().and_then(|r| r[j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory cannot fail");
        String::from_utf8(out).expect("the writer emits UTF-8")
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SCHEMA_LINE}")?;
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|v| v.map_or_else(String::new, |x| format!("{x}"))))?;
        }
        csv.flush()
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f)).map_err(|e| BenchError::io(path, e))
    }

    /// Parse a trace written by [`Trace::write_to`]; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let fail = |line: usize, msg: String| BenchError::Format { path: origin.to_path_buf(), line, msg };
        let mut lines = text.splitn(2, '\n');
        if lines.next().map(str::trim_end) != Some(SCHEMA_LINE) {
            return Err(fail(1, format!("expected '{SCHEMA_LINE}'")));
        }
        let body = lines.next().unwrap_or("");
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let header = rdr.headers().map_err(|e| fail(2, e.to_string()))?.clone();
        let mut trace = Trace::new(header.iter()).map_err(|e| fail(2, e.to_string()))?;
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 3;
            let rec = rec.map_err(|e| fail(line, e.to_string()))?;
            let cells = rec
                .iter()
                .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some).map_err(|e| fail(line, format!("'{c}': {e}"))) })
                .collect::<Result<Vec<_>>>()?;
            trace.push_cells(cells).map_err(|e| fail(line, e.to_string()))?;
        }
        Ok(trace)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::parse(&text, path)
    }
}
