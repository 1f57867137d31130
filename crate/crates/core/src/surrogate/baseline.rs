//! Baselines: the "off" value each feature is switched to.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schema::{DataPoint, FeatureKind, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum BaselineStrategy {
    Zero,
    Reference { values: DataPoint },
    DatasetMedian,
    DatasetMean,
}

impl BaselineStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineStrategy::Zero => "zero",
            BaselineStrategy::Reference { .. } => "reference",
            BaselineStrategy::DatasetMedian => "dataset_median",
            BaselineStrategy::DatasetMean => "dataset_mean",
        }
    }
}

/// A baseline strategy together with the materialized baseline point.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub strategy: BaselineStrategy,
    pub resolved: DataPoint,
}

fn most_frequent(dataset: &Dataset, j: usize, n_categories: usize) -> f64 {
    let mut counts = vec![0usize; n_categories];
    for row in dataset.rows() {
        counts[row[j] as usize] += 1;
    }
    // lowest index wins ties
    let best = (0..n_categories).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
    best as f64
}

impl BaselineConfig {
    /// Materializes a strategy. Dataset strategies use the most frequent
    /// category for categorical features and round counts.
    pub fn resolve(schema: &Schema, strategy: BaselineStrategy, dataset: Option<&Dataset>) -> Result<Self> {
        let values = match &strategy {
            BaselineStrategy::Zero => {
                for f in schema.features() {
                    if f.kind == FeatureKind::Categorical {
                        continue;
                    }
                    if f.min_value() > 0.0 || f.max_value() < 0.0 {
                        return Err(f.invalid("zero baseline lies outside the feature bounds; use a reference"));
                    }
                }
                vec![0.0; schema.dim()]
            }
            BaselineStrategy::Reference { values } => values.values().to_vec(),
            BaselineStrategy::DatasetMedian | BaselineStrategy::DatasetMean => {
                let ds = dataset.ok_or_else(|| Error::config("dataset baselines need a dataset"))?;
                if ds.schema() != schema {
                    return Err(Error::config("dataset schema differs from model schema"));
                }
                schema
                    .features()
                    .iter()
                    .enumerate()
                    .map(|(j, f)| {
                        let s = ds.stats()[j];
                        match f.kind {
                            FeatureKind::Categorical => most_frequent(ds, j, f.categories.len()),
                            _ => {
                                let v = if matches!(strategy, BaselineStrategy::DatasetMedian) {
                                    s.median
                                } else {
                                    s.mean
                                };
                                f.project(v)
                            }
                        }
                    })
                    .collect()
            }
        };
        let resolved = DataPoint::new(values);
        schema.validate(&resolved)?;
        Ok(Self { strategy, resolved })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    #[test]
    fn zero_rejected_when_bounds_exclude_it() {
        let s = Schema::new(vec![FeatureSpec::continuous("salary").with_bounds(1000.0, 9000.0)]).unwrap();
        let err = BaselineConfig::resolve(&s, BaselineStrategy::Zero, None).unwrap_err();
        assert_eq!(err.locus().as_deref(), Some("salary"));
        let ok = BaselineConfig::resolve(
            &s,
            BaselineStrategy::Reference {
                values: DataPoint::new(vec![2500.0]),
            },
            None,
        )
        .unwrap();
        assert_eq!(ok.resolved.values(), &[2500.0]);
    }

    #[test]
    fn dataset_strategies() {
        let s = Schema::new(vec![
            FeatureSpec::count("n"),
            FeatureSpec::categorical("c", ["a", "b", "z"]),
        ])
        .unwrap();
        let rows = [[1.0, 2.0], [2.0, 2.0], [6.0, 0.0]].iter().map(|r| DataPoint::new(r.to_vec())).collect();
        let ds = Dataset::new(s.clone(), rows).unwrap();
        let med = BaselineConfig::resolve(&s, BaselineStrategy::DatasetMedian, Some(&ds)).unwrap();
        assert_eq!(med.resolved.values(), &[2.0, 2.0]);
        let mean = BaselineConfig::resolve(&s, BaselineStrategy::DatasetMean, Some(&ds)).unwrap();
        assert_eq!(mean.resolved.values(), &[3.0, 2.0]);
        assert!(BaselineConfig::resolve(&s, BaselineStrategy::DatasetMean, None).is_err());
    }
}
