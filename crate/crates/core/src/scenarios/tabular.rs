use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{DataError, Error, Result};

/// Streams a headed CSV into a dataset. Every column except `label_column`
/// is a numeric feature, kept in file order; labels are non-negative integers.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => DataError::Csv(format!("{other:?}")).into(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv(e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingColumn(label_column.to_owned()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_owned())
        .collect();

    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while reader
        .read_record(&mut record)
        .map_err(|e| DataError::Csv(e.to_string()))?
    {
        let mut features = Vec::with_capacity(names.len());
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| DataError::NonNumeric {
                row,
                column: headers[i].to_owned(),
                value: cell.to_owned(),
            })?;
            features.push(value);
        }
        let cell = &record[label_idx];
        let label: usize = cell.trim().parse().map_err(|_| DataError::NonNumeric {
            row,
            column: label_column.to_owned(),
            value: cell.to_owned(),
        })?;
        inputs.push(features);
        labels.push(label);
        row += 1;
    }
    let classes = labels.iter().max().map_or(1, |&m| m + 1);
    Dataset::new(inputs, labels, classes)?.with_feature_names(names)
}

/// Writes features (named `f0, f1, …` unless the dataset carries names) and a
/// trailing `label` column. Values use the shortest round-trip formatting.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.width()).map(|i| format!("f{i}")).collect(),
    };
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{},label", names.join(","))?;
        for (x, y) in data.iter() {
            for v in x {
                write!(out, "{v},")?;
            }
            writeln!(out, "{y}")?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
