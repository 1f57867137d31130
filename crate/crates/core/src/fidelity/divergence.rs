//! Pairwise disagreement between attribution schemes at one point.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::schema::DataPoint;
use crate::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, SurrogateExplanation};

/// One (scheme, baseline) combination. Gradient takes no baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeCombo {
    pub scheme: AttributionScheme,
    pub baseline: Option<BaselineConfig>,
}

impl SchemeCombo {
    pub fn new(scheme: AttributionScheme, baseline: Option<BaselineConfig>) -> Self {
        SchemeCombo { scheme, baseline }
    }

    /// `scheme` or `scheme@baseline`.
    pub fn label(&self) -> String {
        match (&self.baseline, self.scheme.uses_baseline()) {
            (Some(b), true) => format!("{}@{}", self.scheme.name(), b.strategy.name()),
            _ => self.scheme.name().to_string(),
        }
    }
}

/// `‖a − b‖₁ / (‖a‖₁ + ‖b‖₁)`, 0 when both are zero.
pub fn normalized_l1(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let den: f64 = a.iter().chain(b).map(|v| v.abs()).sum();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceMatrix {
    pub labels: Vec<String>,
    /// `None` where either combination failed.
    pub divergence: Vec<Vec<Option<f64>>>,
    pub argmax_agreement: Vec<Vec<Option<bool>>>,
    /// Feature name with the largest |weight| per combination.
    pub argmax_feature: Vec<Option<String>>,
    pub weights: Vec<Option<Vec<f64>>>,
    pub errors: Vec<Option<String>>,
}

impl DivergenceMatrix {
    pub fn to_json(&self) -> Value {
        json!({
            "labels": self.labels,
            "divergence": self.divergence,
            "argmax_agreement": self.argmax_agreement,
            "argmax_feature": self.argmax_feature,
            "weights": self.weights,
            "errors": self.errors,
        })
    }
}

/// Explains `x` under every combination and compares the weight vectors.
/// A failing combination leaves its row and column empty.
pub fn compare_schemes(
    model: &Model,
    x: &DataPoint,
    combos: &[SchemeCombo],
    opts: &AttributionOptions,
) -> Result<DivergenceMatrix> {
    if combos.len() < 2 {
        return Err(Error::config("compare needs at least two scheme/baseline combinations"));
    }
    model.schema().validate(x)?;
    let results: Vec<Result<SurrogateExplanation>> = combos
        .iter()
        .map(|c| explain(model, x, &c.scheme, c.baseline.as_ref(), opts))
        .collect();
    let n = combos.len();
    let mut divergence = vec![vec![None; n]; n];
    let mut agree = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            if let (Ok(a), Ok(b)) = (&results[i], &results[j]) {
                let d = if i == j { 0.0 } else { normalized_l1(&a.weights, &b.weights) };
                let same = a.argmax_feature() == b.argmax_feature();
                divergence[i][j] = Some(d);
                divergence[j][i] = Some(d);
                agree[i][j] = Some(same);
                agree[j][i] = Some(same);
            }
        }
    }
    let schema = model.schema();
    Ok(DivergenceMatrix {
        labels: combos.iter().map(SchemeCombo::label).collect(),
        divergence,
        argmax_agreement: agree,
        argmax_feature: results
            .iter()
            .map(|r| r.as_ref().ok().map(|e| schema.feature(e.argmax_feature()).name.clone()))
            .collect(),
        weights: results.iter().map(|r| r.as_ref().ok().map(|e| e.weights.clone())).collect(),
        errors: results.iter().map(|r| r.as_ref().err().map(|e| e.to_string())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FeatureSpec, Schema};
    use crate::surrogate::BaselineStrategy;

    fn linear() -> Model {
        let schema = Schema::new(vec![
            FeatureSpec::continuous("a").with_bounds(-10.0, 10.0),
            FeatureSpec::continuous("b").with_bounds(-10.0, 10.0),
            FeatureSpec::continuous("c").with_bounds(-10.0, 10.0),
        ])
        .unwrap();
        Model::linear(schema, vec![1.0, -2.0, 0.5], 0.3).unwrap()
    }

    #[test]
    fn normalized_l1_values() {
        assert_eq!(normalized_l1(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(normalized_l1(&[0.0], &[0.0]), 0.0);
        assert!((normalized_l1(&[0.75, 0.25], &[2.0 / 3.0, 1.0 / 6.0]) - (1.0 / 6.0) / (1.0 + 5.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn same_combo_twice_is_identical() {
        let m = linear();
        let x = DataPoint::new(vec![1.0, 2.0, 3.0]);
        let b = BaselineConfig::resolve(m.schema(), BaselineStrategy::Zero, None).unwrap();
        let combo = SchemeCombo::new(
            AttributionScheme::ShapleySampled {
                n_permutations: 10,
                seed: 4,
            },
            Some(b),
        );
        let dm = compare_schemes(&m, &x, &[combo.clone(), combo], &AttributionOptions::default()).unwrap();
        assert_eq!(dm.divergence[0][1], Some(0.0));
        assert_eq!(dm.argmax_agreement[0][1], Some(true));
    }

    #[test]
    fn failed_cells_are_absent_and_matrix_is_symmetric() {
        let m = linear();
        let x = DataPoint::new(vec![1.0, 2.0, 3.0]);
        let b = BaselineConfig::resolve(m.schema(), BaselineStrategy::Zero, None).unwrap();
        let combos = vec![
            SchemeCombo::new(AttributionScheme::Gradient { step: None }, None),
            SchemeCombo::new(AttributionScheme::ShapleyExact, Some(b)),
            SchemeCombo::new(AttributionScheme::EdgeFromData, None),
        ];
        let dm = compare_schemes(&m, &x, &combos, &AttributionOptions::default()).unwrap();
        assert!(dm.errors[2].is_some());
        assert_eq!(dm.divergence[2][0], None);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(dm.divergence[i][j], dm.divergence[j][i]);
            }
        }
        assert_eq!(dm.labels, ["gradient", "shapley_exact@zero", "edge_from_data"]);
    }

    #[test]
    fn needs_two_combos() {
        let m = linear();
        let x = DataPoint::new(vec![1.0, 2.0, 3.0]);
        let one = [SchemeCombo::new(AttributionScheme::Gradient { step: None }, None)];
        assert!(compare_schemes(&m, &x, &one, &AttributionOptions::default()).is_err());
    }
}
