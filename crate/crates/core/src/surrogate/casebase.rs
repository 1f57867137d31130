//! Case-based explanations: the most similar rows of a dataset.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{Model, OutputSelector};
use crate::schema::{DataPoint, FeatureKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseMetric {
    /// `|f(row) − f(x)|`
    ScoreSpace,
    /// `Σ_j |row_j − x_j| / MAD_j`; categorical features count a mismatch as 1.
    InputMad,
    /// `α · score_space + (1 − α) · input_mad`, each min-max normalized
    /// over the dataset.
    Blended { alpha: f64 },
}

impl Default for CaseMetric {
    fn default() -> Self {
        CaseMetric::Blended { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub row: usize,
    pub point: DataPoint,
    pub score: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseBasedExplanation {
    pub neighbors: Vec<Neighbor>,
    pub metric: CaseMetric,
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// The `k` rows nearest to `x`, ascending by distance, ties by row index.
pub fn case_based(
    model: &Model,
    dataset: &Dataset,
    x: &DataPoint,
    k: usize,
    metric: CaseMetric,
) -> Result<CaseBasedExplanation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k > dataset.len() {
        return Err(Error::config(format!("k = {k} exceeds the dataset size {}", dataset.len())));
    }
    if let CaseMetric::Blended { alpha } = metric {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("blend weight must lie in [0, 1]"));
        }
    }
    let schema = model.schema();
    schema.validate(x)?;
    let selector: OutputSelector = model.default_selector(x.values())?;
    let fx = model.scalar(x.values(), selector)?;
    let scales = dataset.scales();
    let scores = dataset
        .rows()
        .iter()
        .map(|r| model.scalar(r.values(), selector))
        .collect::<Result<Vec<_>>>()?;
    let score_dist: Vec<f64> = scores.iter().map(|s| (s - fx).abs()).collect();
    let input_dist: Vec<f64> = dataset
        .rows()
        .iter()
        .map(|r| {
            schema
                .features()
                .iter()
                .enumerate()
                .map(|(j, f)| match f.kind {
                    FeatureKind::Categorical => f64::from(u8::from(r[j] != x[j])),
                    _ => (r[j] - x[j]).abs() / scales[j],
                })
                .sum()
        })
        .collect();
    let distance: Vec<f64> = match metric {
        CaseMetric::ScoreSpace => score_dist,
        CaseMetric::InputMad => input_dist,
        CaseMetric::Blended { alpha } => min_max(&score_dist)
            .iter()
            .zip(min_max(&input_dist))
            .map(|(s, i)| alpha * s + (1.0 - alpha) * i)
            .collect(),
    };
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| distance[a].total_cmp(&distance[b]).then(a.cmp(&b)));
    let neighbors = order
        .into_iter()
        .take(k)
        .map(|row| Neighbor {
            row,
            point: dataset.rows()[row].clone(),
            score: scores[row],
            distance: distance[row],
        })
        .collect();
    Ok(CaseBasedExplanation { neighbors, metric })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FeatureSpec, Schema};

    fn fixture() -> (Model, Dataset) {
        let schema = Schema::new(vec![FeatureSpec::continuous("a"), FeatureSpec::continuous("b")]).unwrap();
        let rows = [[0.0, 0.0], [1.0, 0.0], [2.0, 2.0], [4.0, 1.0], [3.0, 4.0]]
            .iter()
            .map(|r| DataPoint::new(r.to_vec()))
            .collect();
        let ds = Dataset::new(schema.clone(), rows).unwrap();
        (Model::linear(schema, vec![1.0, -1.0], 0.0).unwrap(), ds)
    }

    #[test]
    fn hand_computed_mad_ordering() {
        // a = {0,1,2,4,3}: median 2, |dev| = {2,1,0,2,1} -> MAD 1
        // b = {0,0,2,1,4}: median 1, |dev| = {1,1,1,0,3} -> MAD 1
        // from x = (1,1): distances 2, 1, 2, 3, 5
        let (m, ds) = fixture();
        let x = DataPoint::new(vec![1.0, 1.0]);
        let e = case_based(&m, &ds, &x, 5, CaseMetric::InputMad).unwrap();
        let rows: Vec<usize> = e.neighbors.iter().map(|n| n.row).collect();
        assert_eq!(rows, vec![1, 0, 2, 3, 4]);
        let d: Vec<f64> = e.neighbors.iter().map(|n| n.distance).collect();
        assert_eq!(d, vec![1.0, 2.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn self_is_nearest_under_every_metric() {
        let (m, ds) = fixture();
        let x = ds.rows()[3].clone();
        for metric in [CaseMetric::ScoreSpace, CaseMetric::InputMad, CaseMetric::default()] {
            let e = case_based(&m, &ds, &x, 1, metric).unwrap();
            assert_eq!(e.neighbors[0].distance, 0.0);
            assert_eq!(e.neighbors[0].point, x);
        }
    }

    #[test]
    fn score_space_ties_break_by_row() {
        // scores a - b = {0, 1, 0, 3, -1}; from x with score 0: {0,1,0,3,1}
        let (m, ds) = fixture();
        let x = DataPoint::new(vec![5.0, 5.0]);
        let e = case_based(&m, &ds, &x, 5, CaseMetric::ScoreSpace).unwrap();
        let rows: Vec<usize> = e.neighbors.iter().map(|n| n.row).collect();
        assert_eq!(rows, vec![0, 2, 1, 4, 3]);
    }

    #[test]
    fn k_larger_than_dataset() {
        let (m, ds) = fixture();
        assert!(case_based(&m, &ds, &DataPoint::new(vec![0.0, 0.0]), 6, CaseMetric::ScoreSpace).is_err());
    }
}
