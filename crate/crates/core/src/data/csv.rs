use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabelVector, Metric};
use crate::error::{MbnError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Zero-based column holding class labels, removed from the features.
    pub label_column: Option<usize>,
    pub delimiter: u8,
    pub has_header: bool,
    pub metric: Metric,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { label_column: None, delimiter: b',', has_header: false, metric: Metric::Euclidean }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_csv(file, options, name)
}

/// Parses delimited text into a [`Dataset`]. Row numbers in errors are
/// 1-based and count data rows only.
pub fn read_csv<R: Read>(reader: R, options: &CsvOptions, name: impl Into<String>) -> Result<Dataset> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);

    let mut width = None;
    let mut data = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut rows = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| MbnError::Parse { row, message: e.to_string() })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(MbnError::Parse { row, message: format!("expected {w} fields, found {}", record.len()) })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            if Some(col) == options.label_column {
                raw_labels.push(field.to_string());
                continue;
            }
            let x: f64 = field.parse().map_err(|_| MbnError::Parse {
                row,
                message: format!("column {} is not numeric: '{field}'", col + 1),
            })?;
            data.push(x);
        }
        rows += 1;
    }

    let width = width.unwrap_or(0);
    if let Some(lc) = options.label_column {
        if rows > 0 && lc >= width {
            return Err(MbnError::Parse {
                row: 1,
                message: format!("label column {lc} out of range for {width} fields"),
            });
        }
    }
    let cols = width - usize::from(options.label_column.is_some());
    if rows < 2 {
        return Err(MbnError::InvalidDataset(format!("need at least 2 rows, found {rows}")));
    }
    let features = Matrix::from_vec(rows, cols, data)?;
    let labels = options.label_column.map(|_| parse_labels(&raw_labels));
    Dataset::new(features, labels, options.metric, name)
}

fn parse_labels(raw: &[String]) -> LabelVector {
    let numeric: Option<Vec<i64>> = raw
        .iter()
        .map(|s| s.parse::<i64>().ok().or_else(|| s.parse::<f64>().ok().filter(|f| f.fract() == 0.0).map(|f| f as i64)))
        .collect();
    match numeric {
        Some(v) => LabelVector::from_raw(&v),
        None => LabelVector::from_raw(raw),
    }
}

/// Writes features (and labels as a trailing column, if present). Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for i in 0..dataset.n() {
        let row = dataset.features.row(i);
        let mut fields: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        if let Some(l) = &dataset.labels {
            fields.push(l.as_slice()[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    super::write_atomic(path.as_ref(), out.as_bytes())
}
