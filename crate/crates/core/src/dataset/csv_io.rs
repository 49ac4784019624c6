//! Dataset CSV ingestion and writing.
//!
//! Comma-separated UTF-8 with a header row, `.` decimal separator, empty
//! cell = missing. Rows containing any missing cell are dropped and counted.

use std::path::Path;

use super::{ColumnKind, Dataset, DatasetError, FeatureSchema};
use crate::num::Scalar;

/// A loaded dataset plus the number of dropped rows.
#[derive(Debug)]
pub struct Loaded<F: Scalar> {
    pub dataset: Dataset<F>,
    pub dropped_rows: usize,
}

/// Reads a CSV file against a schema. Header must contain every schema
/// column; extra columns are ignored. Cells must be finite numbers,
/// declared categorical levels, or `0`/`1` for the label.
pub fn load_csv<F: Scalar>(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
) -> Result<Loaded<F>, DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?;

    let headers = reader
        .headers()
        .map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?
        .clone();
    let position = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingHeader(name.to_string()))
    };

    let feature_pos: Vec<usize> = schema
        .columns
        .iter()
        .map(|(name, _)| position(name))
        .collect::<Result<_, _>>()?;
    let x_pos = position(&schema.coord_x)?;
    let y_pos = position(&schema.coord_y)?;
    let label_pos = position(&schema.label)?;

    let parse_number = |row: usize, column: &str, value: &str| -> Result<f64, DatasetError> {
        let v: f64 = value.parse().map_err(|_| DatasetError::NotNumeric {
            row,
            column: column.to_string(),
            value: value.to_string(),
        })?;
        if !v.is_finite() {
            return Err(DatasetError::NotFinite {
                row,
                column: column.to_string(),
                value: value.to_string(),
            });
        }
        Ok(v)
    };

    let p = schema.n_features();
    let mut features: Vec<F> = Vec::new();
    let mut coords: Vec<[F; 2]> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut dropped = 0usize;

    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1; // 1-based data row
        let record = record.map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?;
        let used = feature_pos
            .iter()
            .chain([&x_pos, &y_pos, &label_pos])
            .map(|&pos| record.get(pos).unwrap_or(""));
        if used.clone().any(|cell| cell.is_empty()) {
            dropped += 1;
            continue;
        }

        let mut cells = Vec::with_capacity(p);
        for ((name, kind), &pos) in schema.columns.iter().zip(&feature_pos) {
            let value = record.get(pos).unwrap_or("");
            let cell = match kind {
                ColumnKind::Numeric => parse_number(row, name, value)?,
                ColumnKind::Categorical { levels } => levels
                    .iter()
                    .position(|l| l == value)
                    .ok_or_else(|| DatasetError::UnknownLevel {
                        row,
                        column: name.clone(),
                        value: value.to_string(),
                    })? as f64,
            };
            cells.push(F::of(cell));
        }
        let x = parse_number(row, &schema.coord_x, record.get(x_pos).unwrap_or(""))?;
        let y = parse_number(row, &schema.coord_y, record.get(y_pos).unwrap_or(""))?;
        let label_raw = record.get(label_pos).unwrap_or("");
        let label = match label_raw.trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(DatasetError::BadLabel {
                    row,
                    column: schema.label.clone(),
                    value: other.to_string(),
                })
            }
        };

        features.extend_from_slice(&cells);
        coords.push([F::of(x), F::of(y)]);
        labels.push(label);
    }

    Ok(Loaded {
        dataset: Dataset {
            schema: schema.clone(),
            features,
            coords,
            labels,
        },
        dropped_rows: dropped,
    })
}

/// Writes a dataset in the format `load_csv` reads: features in schema
/// order, then the coordinate pair, then the label. Numeric cells use the
/// shortest round-trip representation.
pub fn write_csv<F: Scalar>(path: impl AsRef<Path>, ds: &Dataset<F>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|source| DatasetError::Csv {
        path: display.clone(),
        source,
    })?;

    let mut header: Vec<&str> = ds.schema.columns.iter().map(|(n, _)| n.as_str()).collect();
    header.push(&ds.schema.coord_x);
    header.push(&ds.schema.coord_y);
    header.push(&ds.schema.label);
    writer
        .write_record(&header)
        .map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?;

    let p = ds.schema.n_features();
    let mut record: Vec<String> = Vec::with_capacity(p + 3);
    for i in 0..ds.n() {
        record.clear();
        for (j, (_, kind)) in ds.schema.columns.iter().enumerate() {
            let cell = ds.features[i * p + j];
            match kind {
                ColumnKind::Numeric => record.push(format!("{}", cell.f64())),
                ColumnKind::Categorical { levels } => {
                    record.push(levels[cell.f64() as usize].clone())
                }
            }
        }
        record.push(format!("{}", ds.coords[i][0].f64()));
        record.push(format!("{}", ds.coords[i][1].f64()));
        record.push(format!("{}", ds.labels[i]));
        writer
            .write_record(&record)
            .map_err(|source| DatasetError::Csv {
                path: display.clone(),
                source,
            })?;
    }
    writer.flush().map_err(|source| DatasetError::Io {
        path: display,
        source,
    })?;
    Ok(())
}
