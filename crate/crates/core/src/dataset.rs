//! Datasets with robust per-feature statistics.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{DataPoint, Schema};

/// Robust spread of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub median: f64,
    pub mad: f64,
    pub mean: f64,
}

impl FeatureStats {
    /// MAD used for distance weighting and radii. A zero MAD is replaced by
    /// `max(1e-6, 1e-3 * |median|)` so constant features stay nearly immutable.
    pub fn scale(&self) -> f64 {
        if self.mad > 0.0 {
            self.mad
        } else {
            (1e-3 * self.median.abs()).max(1e-6)
        }
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median, median absolute deviation and mean of every column.
pub fn compute_stats(schema: &Schema, rows: &[DataPoint]) -> Result<Vec<FeatureStats>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    (0..schema.dim())
        .map(|j| {
            let mut column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            let med = median(&mut column);
            let mut deviations: Vec<f64> = column.iter().map(|v| (v - med).abs()).collect();
            let mad = median(&mut deviations);
            Ok(FeatureStats {
                median: med,
                mad,
                mean,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<DataPoint>,
    stats: Vec<FeatureStats>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<DataPoint>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            schema.validate(row).map_err(|e| Error::Batch {
                index: i,
                source: Box::new(e),
            })?;
        }
        let stats = compute_stats(&schema, &rows)?;
        Ok(Self {
            schema,
            rows,
            stats,
        })
    }

    /// Reads a CSV whose header lists the schema's feature names in order.
    /// Categorical cells may hold labels or indices.
    pub fn from_csv<R: Read>(schema: Schema, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse("csv header", e.to_string()))?
            .clone();
        let names: Vec<&str> = schema.names().collect();
        if headers.iter().collect::<Vec<_>>() != names {
            return Err(Error::parse(
                "csv header",
                format!("expected columns {names:?}, found {:?}", headers.iter().collect::<Vec<_>>()),
            ));
        }
        let mut rows = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::parse(format!("csv row {}", i + 1), e.to_string()))?;
            let values = schema
                .features()
                .iter()
                .zip(record.iter())
                .map(|(f, cell)| {
                    let cell = cell.trim();
                    let v = match f.categories.iter().position(|c| c == cell) {
                        Some(idx) => idx as f64,
                        None => cell.parse::<f64>().map_err(|_| {
                            Error::parse(format!("csv row {}, column '{}'", i + 1, f.name), format!("cannot parse '{cell}'"))
                        })?,
                    };
                    f.check_value(v).map_err(|e| {
                        Error::parse(format!("csv row {}, column '{}'", i + 1, f.name), e.to_string())
                    })?;
                    Ok(v)
                })
                .collect::<Result<Vec<_>>>()?;
            schema.check_dim(values.len(), &format!("csv row {}", i + 1))?;
            rows.push(DataPoint::new(values));
        }
        Self::new(schema, rows)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[DataPoint] {
        &self.rows
    }

    pub fn stats(&self) -> &[FeatureStats] {
        &self.stats
    }

    /// Per-feature MAD with zero-spread substitution applied.
    pub fn scales(&self) -> Vec<f64> {
        self.stats.iter().map(FeatureStats::scale).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; statistics are recomputed.
    pub fn push(&mut self, row: DataPoint) -> Result<()> {
        self.schema.validate(&row)?;
        self.rows.push(row);
        self.stats = compute_stats(&self.schema, &self.rows)?;
        Ok(())
    }
}
