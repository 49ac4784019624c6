//! Tabular data with planar coordinates and a binary label.
//!
//! A [`FeatureSchema`] declares feature columns (numeric or categorical with
//! a fixed, ordered level list), the two coordinate columns and the label
//! column. A [`Dataset`] stores features row-major with categorical cells as
//! level indices. Datasets are immutable after construction and safe to
//! share across threads.

mod csv_io;
mod schema_io;

use thiserror::Error;

use crate::num::Scalar;

pub use csv_io::{load_csv, write_csv, Loaded};
pub use schema_io::{parse_schema, parse_schema_str, write_schema};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate column name `{0}` in schema")]
    DuplicateColumn(String),
    #[error("column `{0}` is declared both as a feature and as coord/label")]
    ReservedColumn(String),
    #[error("categorical column `{0}` declares {1} level(s); at least 2 required")]
    TooFewLevels(String, usize),
    #[error("categorical column `{0}` repeats level `{1}`")]
    DuplicateLevel(String, String),
    #[error("schema has no feature columns")]
    NoFeatures,
    #[error("dataset is empty")]
    Empty,
    #[error("missing header column `{0}`")]
    MissingHeader(String),
    #[error("data row {row}, column `{column}`: unknown categorical level `{value}`")]
    UnknownLevel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}, column `{column}`: `{value}` is not numeric")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}, column `{column}`: `{value}` is not a finite number")]
    NotFinite {
        row: usize,
        column: String,
        value: String,
    },
    #[error("data row {row}, column `{column}`: label `{value}` is not 0 or 1")]
    BadLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: ::csv::Error,
    },
    #[error("schema file {path} line {line}: {message}")]
    SchemaSyntax {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Numeric,
    Categorical { levels: Vec<String> },
}

/// Declared layout of a dataset: feature columns in order, the coordinate
/// pair and the binary label column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    pub columns: Vec<(String, ColumnKind)>,
    pub coord_x: String,
    pub coord_y: String,
    pub label: String,
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<(String, ColumnKind)>,
        coord_x: impl Into<String>,
        coord_y: impl Into<String>,
        label: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        let schema = FeatureSchema {
            columns,
            coord_x: coord_x.into(),
            coord_y: coord_y.into(),
            label: label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        if self.columns.is_empty() {
            return Err(DatasetError::NoFeatures);
        }
        let mut seen: Vec<&str> = Vec::new();
        let reserved = [&self.coord_x, &self.coord_y, &self.label];
        for (name, kind) in &self.columns {
            if seen.contains(&name.as_str()) {
                return Err(DatasetError::DuplicateColumn(name.clone()));
            }
            seen.push(name);
            if reserved.iter().any(|r| *r == name) {
                return Err(DatasetError::ReservedColumn(name.clone()));
            }
            if let ColumnKind::Categorical { levels } = kind {
                if levels.len() < 2 {
                    return Err(DatasetError::TooFewLevels(name.clone(), levels.len()));
                }
                for (i, level) in levels.iter().enumerate() {
                    if levels[..i].contains(level) {
                        return Err(DatasetError::DuplicateLevel(name.clone(), level.clone()));
                    }
                }
            }
        }
        if self.coord_x == self.coord_y
            || self.coord_x == self.label
            || self.coord_y == self.label
        {
            return Err(DatasetError::DuplicateColumn(self.coord_x.clone()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Number of design-matrix columns after one-hot expansion.
    pub fn design_width(&self) -> usize {
        self.columns
            .iter()
            .map(|(_, kind)| match kind {
                ColumnKind::Numeric => 1,
                ColumnKind::Categorical { levels } => levels.len() - 1,
            })
            .sum()
    }
}

/// Rows of features with coordinates and binary labels. Categorical cells
/// hold the level index as a float.
#[derive(Debug, Clone)]
pub struct Dataset<F: Scalar> {
    pub schema: FeatureSchema,
    /// Row-major `n × n_features` cell matrix.
    pub features: Vec<F>,
    pub coords: Vec<[F; 2]>,
    pub labels: Vec<u8>,
}

impl<F: Scalar> Dataset<F> {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[F] {
        let p = self.schema.n_features();
        &self.features[i * p..(i + 1) * p]
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.n() - pos, pos)
    }

    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.label_counts();
        neg > 0 && pos > 0
    }
}

/// Fully numeric design matrix produced by [`one_hot`].
#[derive(Debug, Clone)]
pub struct DesignMatrix<F: Scalar> {
    pub n: usize,
    pub p: usize,
    /// Row-major `n × p`.
    pub data: Vec<F>,
    pub column_labels: Vec<String>,
}

impl<F: Scalar> DesignMatrix<F> {
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    /// Copies the given rows into a new matrix.
    pub fn subset(&self, rows: &[u32]) -> DesignMatrix<F> {
        let mut data = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            data.extend_from_slice(self.row(r as usize));
        }
        DesignMatrix {
            n: rows.len(),
            p: self.p,
            data,
            column_labels: self.column_labels.clone(),
        }
    }
}

/// One-hot expansion result; `warnings` flags categorical columns with a
/// single observed level.
#[derive(Debug, Clone)]
pub struct OneHot<F: Scalar> {
    pub design: DesignMatrix<F>,
    pub warnings: Vec<String>,
}

/// Expands categorical columns to reference-coded indicators.
///
/// A categorical column with `L` declared levels becomes `L − 1` indicator
/// columns; the first declared level is the dropped reference. Numeric
/// columns pass through. Column order is deterministic: schema order, with
/// indicator columns in declared level order.
pub fn one_hot<F: Scalar>(ds: &Dataset<F>) -> Result<OneHot<F>, DatasetError> {
    if ds.schema.columns.is_empty() {
        return Err(DatasetError::NoFeatures);
    }
    let n = ds.n();
    let p = ds.schema.design_width();
    let mut column_labels = Vec::with_capacity(p);
    for (name, kind) in &ds.schema.columns {
        match kind {
            ColumnKind::Numeric => column_labels.push(name.clone()),
            ColumnKind::Categorical { levels } => {
                for level in &levels[1..] {
                    column_labels.push(format!("{name}={level}"));
                }
            }
        }
    }

    let mut data = vec![F::zero(); n * p];
    let mut warnings = Vec::new();
    let raw_p = ds.schema.n_features();
    for i in 0..n {
        let row = &ds.features[i * raw_p..(i + 1) * raw_p];
        let out = &mut data[i * p..(i + 1) * p];
        let mut c = 0;
        for (j, (_, kind)) in ds.schema.columns.iter().enumerate() {
            match kind {
                ColumnKind::Numeric => {
                    out[c] = row[j];
                    c += 1;
                }
                ColumnKind::Categorical { levels } => {
                    let idx = row[j].f64() as usize;
                    for l in 1..levels.len() {
                        out[c] = if idx == l { F::one() } else { F::zero() };
                        c += 1;
                    }
                }
            }
        }
    }

    for (j, (name, kind)) in ds.schema.columns.iter().enumerate() {
        if let ColumnKind::Categorical { .. } = kind {
            let first = ds.features.get(j).copied();
            let uniform = (0..n).all(|i| Some(ds.features[i * raw_p + j]) == first);
            if n > 0 && uniform {
                warnings.push(format!(
                    "categorical column `{name}` has a single observed level; its indicators are constant"
                ));
            }
        }
    }

    Ok(OneHot {
        design: DesignMatrix {
            n,
            p,
            data,
            column_labels,
        },
        warnings,
    })
}

/// Descriptive statistics of one numeric column.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSummary {
    pub name: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub na_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalSummary {
    pub name: String,
    /// `(level, count, percent)` in declared level order.
    pub rows: Vec<(String, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub numeric: Vec<NumericSummary>,
    pub categorical: Vec<CategoricalSummary>,
    /// `(negatives, positives)` of the label column.
    pub label_counts: (usize, usize),
}

/// Quantile by linear interpolation between closest order statistics
/// of the sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Computes per-column descriptive summaries.
pub fn summarize<F: Scalar>(ds: &Dataset<F>) -> Result<SummaryTable, DatasetError> {
    let n = ds.n();
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    let raw_p = ds.schema.n_features();
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    for (j, (name, kind)) in ds.schema.columns.iter().enumerate() {
        match kind {
            ColumnKind::Numeric => {
                let mut values: Vec<f64> =
                    (0..n).map(|i| ds.features[i * raw_p + j].f64()).collect();
                values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                let mean = values.iter().sum::<f64>() / n as f64;
                let q1 = quantile_sorted(&values, 0.25);
                let q3 = quantile_sorted(&values, 0.75);
                numeric.push(NumericSummary {
                    name: name.clone(),
                    n,
                    min: values[0],
                    q1,
                    median: quantile_sorted(&values, 0.5),
                    mean,
                    q3,
                    max: values[n - 1],
                    iqr: q3 - q1,
                    na_count: 0,
                });
            }
            ColumnKind::Categorical { levels } => {
                let mut counts = vec![0usize; levels.len()];
                for i in 0..n {
                    counts[ds.features[i * raw_p + j].f64() as usize] += 1;
                }
                let rows = levels
                    .iter()
                    .zip(&counts)
                    .map(|(level, &c)| (level.clone(), c, 100.0 * c as f64 / n as f64))
                    .collect();
                categorical.push(CategoricalSummary {
                    name: name.clone(),
                    rows,
                });
            }
        }
    }
    Ok(SummaryTable {
        numeric,
        categorical,
        label_counts: ds.label_counts(),
    })
}
