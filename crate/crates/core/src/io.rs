//! CSV ingestion. The header names the columns, `y` is the response, every
//! other column is a regressor, and an intercept of ones is prepended.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Dataset;

pub const RESPONSE_COLUMN: &str = "y";
pub const INTERCEPT_NAME: &str = "intercept";

/// Reads a raw (un-normalized) dataset from a CSV file.
pub fn read_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file)
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header row: {e}")))?
        .clone();
    let y_pos: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == RESPONSE_COLUMN)
        .map(|(i, _)| i)
        .collect();
    let y_col = match y_pos.as_slice() {
        [i] => *i,
        [] => {
            return Err(Error::Data(format!(
                "header has no `{RESPONSE_COLUMN}` column"
            )))
        }
        _ => {
            return Err(Error::Data(format!(
                "header has more than one `{RESPONSE_COLUMN}` column"
            )))
        }
    };
    let mut names = vec![INTERCEPT_NAME.to_string()];
    for (i, h) in headers.iter().enumerate() {
        if i == y_col {
            continue;
        }
        if h.is_empty() {
            return Err(Error::Data(format!("column {} has an empty name", i + 1)));
        }
        if names.iter().any(|n| n == h) {
            return Err(Error::Data(format!("duplicate column name `{h}`")));
        }
        names.push(h.to_string());
    }

    let width = headers.len();
    let mut y = Vec::new();
    let mut cells = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        // Row 1 is the header.
        let row = r + 2;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.len() != width {
            return Err(Error::Data(format!(
                "row {row}: expected {width} fields, found {}",
                record.len()
            )));
        }
        cells.push(1.0);
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "row {row}, column `{}`: cannot parse {field:?} as a number",
                    &headers[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {row}, column `{}`: non-finite value",
                    &headers[i]
                )));
            }
            if i == y_col {
                y.push(v);
            } else {
                cells.push(v);
            }
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(Error::Data("no data rows".into()));
    }
    let p = names.len();
    let x = DMatrix::from_row_slice(n, p, &cells);
    Dataset::with_names(x, DVector::from_vec(y), names)
}

/// Writes the regressors (without the intercept column) and `y` in the
/// layout [`parse_csv`] reads back.
pub fn write_csv<W: Write>(writer: W, ds: &Dataset) -> Result<()> {
    let raw = ds.raw_x();
    let skip = usize::from(ds.names().first().map(String::as_str) == Some(INTERCEPT_NAME));
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.names()[skip..].iter().map(String::as_str).collect();
    header.push(RESPONSE_COLUMN);
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.n() {
        let mut row: Vec<String> = (skip..ds.p())
            .map(|j| format!("{:?}", raw[(i, j)]))
            .collect();
        row.push(format!("{:?}", ds.y()[i]));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}
