//! Dense matrix CSV and edge-list files.
//!
//! A matrix file starts with a `rows,cols` line followed by the rows, one per line. Vectors are
//! stored as single-column matrices.

use std::path::Path;

use nalgebra::DMatrix;
use sca_core::network::{parse_edge_list, write_edge_list, GraphStep};

use crate::error::{BenchError, Result};

pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().flexible(true).terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
        w.write_record([a.nrows().to_string(), a.ncols().to_string()]).expect("in-memory write");
        for i in 0..a.nrows() {
            w.write_record((0..a.ncols()).map(|j| format!("{}", a[(i, j)]))).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    String::from_utf8(out).expect("the writer emits UTF-8")
}

pub fn parse_matrix(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let fail = |line: usize, msg: String| BenchError::Format { path: origin.to_path_buf(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = records.next().ok_or_else(|| fail(1, "empty file".into()))?.map_err(|e| fail(1, e.to_string()))?;
    let dims: Vec<usize> = header
        .iter()
        .map(|v| v.trim().parse::<usize>().map_err(|e| fail(1, format!("bad dimension '{v}': {e}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(fail(1, "expected 'rows,cols'".into()));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| fail(line, e.to_string()))?;
        if i >= rows {
            return Err(fail(line, format!("more than {rows} rows")));
        }
        if rec.len() != cols {
            return Err(fail(line, format!("expected {cols} values, got {}", rec.len())));
        }
        for v in rec.iter() {
            let x: f64 = v.trim().parse().map_err(|e| fail(line, format!("'{v}': {e}")))?;
            if !x.is_finite() {
                return Err(fail(line, format!("non-finite value '{v}'")));
            }
            data.push(x);
        }
    }
    if data.len() != rows * cols {
        return Err(fail(rows + 1, format!("expected {rows} rows, got {}", data.len() / cols.max(1))));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix(path: &Path, a: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, matrix_to_csv(a)).map_err(|e| BenchError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(BenchError::Format { path: path.to_path_buf(), line: 1, msg: format!("expected one column, got {}", m.ncols()) });
    }
    Ok(m.iter().copied().collect())
}

pub fn write_edge_list_file(path: &Path, steps: &[GraphStep]) -> Result<()> {
    std::fs::write(path, write_edge_list(steps)).map_err(|e| BenchError::io(path, e))
}

pub fn read_edge_list_file(path: &Path, nodes: usize) -> Result<Vec<GraphStep>> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_edge_list(&text, nodes).map_err(|e| BenchError::Format { path: path.to_path_buf(), line: 0, msg: e.to_string() })
}
