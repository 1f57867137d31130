//! Local linear surrogates over the binary baseline hypercube, gradient
//! sensitivity, global tree distillation and case-based neighbours.
//!
//! Binarized schemes never interpolate a feature: every evaluated point has
//! each coordinate equal either to the anchor value `x_k` or to the
//! baseline value `b_k`. The schemes differ only in which vertices of the
//! resulting cube they fit and how those vertices are weighted.

mod attribution;
mod baseline;
mod casebase;
mod tree;
mod wls;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use attribution::{
    banzhaf_attribution, edge_attribution, explain, gradient_attribution, lime_fit, shapley_attribution,
    SamplingMode,
};
pub use baseline::{BaselineConfig, BaselineStrategy};
pub use casebase::{case_based, CaseBasedExplanation, CaseMetric, Neighbor};
pub use tree::{global_tree_surrogate, GlobalTreeSurrogate, RegionSampling, TreeSurrogateConfig};
pub use wls::{weighted_least_squares, WlsFit};

use crate::error::{Error, Result};
use crate::model::OutputSelector;
use crate::schema::DataPoint;

/// Default bound on `d` for the exact enumeration schemes (2^16 evaluations).
pub const DEFAULT_EXACT_LIMIT: usize = 16;

/// A vertex of the baseline hypercube: `true` keeps the anchor value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryPattern(pub Vec<bool>);

impl BinaryPattern {
    pub fn ones(d: usize) -> Self {
        Self(vec![true; d])
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![false; d])
    }

    /// Pattern whose bit `k` is `mask >> k & 1`.
    pub fn from_mask(mask: u64, d: usize) -> Self {
        Self((0..d).map(|k| mask >> k & 1 == 1).collect())
    }

    /// Number of features switched to the baseline.
    pub fn zeros_count(&self) -> usize {
        self.0.iter().filter(|b| !**b).count()
    }
}

/// `value_k = bits_k ? x_k : b_k`.
pub fn materialize(pattern: &BinaryPattern, x: &DataPoint, baseline: &DataPoint) -> Result<DataPoint> {
    if pattern.0.len() != x.len() || baseline.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: if pattern.0.len() != x.len() {
                pattern.0.len()
            } else {
                baseline.len()
            },
            context: "pattern materialization".into(),
        });
    }
    Ok(DataPoint::new(
        pattern
            .0
            .iter()
            .zip(x.values().iter().zip(baseline.values()))
            .map(|(&keep, (&xv, &bv))| if keep { xv } else { bv })
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributionScheme {
    /// Local sensitivity. `step` requests central differences instead of
    /// the analytic gradient.
    Gradient {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
    },
    EdgeFromData,
    ShapleyExact,
    ShapleySampled { n_permutations: usize, seed: u64 },
    BanzhafExact,
    BanzhafSampled { n: usize, seed: u64 },
    LimeKernel {
        n_samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kernel_width: Option<f64>,
        seed: u64,
    },
}

impl AttributionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            AttributionScheme::Gradient { .. } => "gradient",
            AttributionScheme::EdgeFromData => "edge_from_data",
            AttributionScheme::ShapleyExact => "shapley_exact",
            AttributionScheme::ShapleySampled { .. } => "shapley_sampled",
            AttributionScheme::BanzhafExact => "banzhaf_exact",
            AttributionScheme::BanzhafSampled { .. } => "banzhaf_sampled",
            AttributionScheme::LimeKernel { .. } => "lime_kernel",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            AttributionScheme::ShapleySampled { seed, .. }
            | AttributionScheme::BanzhafSampled { seed, .. }
            | AttributionScheme::LimeKernel { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    pub fn uses_baseline(&self) -> bool {
        !matches!(self, AttributionScheme::Gradient { .. })
    }

    pub fn validate(&self, d: usize, exact_limit: usize) -> Result<()> {
        match self {
            AttributionScheme::ShapleyExact | AttributionScheme::BanzhafExact if d > exact_limit => {
                Err(Error::ExactLimitExceeded {
                    dimension: d,
                    limit: exact_limit,
                })
            }
            AttributionScheme::ShapleySampled { n_permutations: 0, .. }
            | AttributionScheme::BanzhafSampled { n: 0, .. } => Err(Error::config("sampled schemes need n >= 1")),
            AttributionScheme::LimeKernel {
                n_samples,
                kernel_width,
                ..
            } => {
                if *n_samples < d + 1 {
                    return Err(Error::config(format!("lime needs at least d + 1 = {} samples", d + 1)));
                }
                match kernel_width {
                    Some(w) if !(*w > 0.0) => Err(Error::config("kernel width must be positive")),
                    _ => Ok(()),
                }
            }
            AttributionScheme::Gradient { step: Some(h) } if !(*h > 0.0) => {
                Err(Error::config("finite-difference step must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributionOptions {
    pub exact_limit: usize,
    /// Scalar to explain; `None` picks the score or the predicted class.
    pub output: Option<OutputSelector>,
}

impl Default for AttributionOptions {
    fn default() -> Self {
        Self {
            exact_limit: DEFAULT_EXACT_LIMIT,
            output: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    pub r_squared: Option<f64>,
    pub n_evaluations: usize,
    /// Set when the LIME normal equations were singular and ridge was used.
    pub regularized: bool,
}

/// Per-feature weights plus the exact configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateExplanation {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub scheme: AttributionScheme,
    /// Absent for the gradient scheme.
    pub baseline: Option<BaselineConfig>,
    pub anchor: DataPoint,
    pub output: OutputSelector,
    pub diagnostics: Diagnostics,
}

/// Index of the largest absolute weight, lowest index on ties.
pub fn argmax_abs(weights: &[f64]) -> usize {
    let abs: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
    crate::model::argmax(&abs)
}

impl SurrogateExplanation {
    pub fn argmax_feature(&self) -> usize {
        argmax_abs(&self.weights)
    }

    /// Coordinates the linear surrogate is expressed in: raw values for the
    /// gradient scheme, position along each anchor–baseline edge otherwise
    /// (1 at the anchor, 0 at the baseline).
    pub fn features_of(&self, p: &[f64]) -> Vec<f64> {
        match &self.baseline {
            None => p.to_vec(),
            Some(b) => p
                .iter()
                .zip(self.anchor.values().iter().zip(b.resolved.values()))
                .map(|(&pv, (&xv, &bv))| {
                    if xv == bv {
                        1.0
                    } else {
                        (pv - bv) / (xv - bv)
                    }
                })
                .collect(),
        }
    }

    /// Surrogate prediction `intercept + weights · φ(p)`.
    pub fn predict(&self, p: &[f64]) -> f64 {
        self.intercept + crate::model::dot(&self.weights, &self.features_of(p))
    }

    pub fn to_document(&self) -> ExplanationDocument {
        ExplanationDocument {
            scheme: self.scheme.clone(),
            baseline: match &self.baseline {
                Some(b) => BaselineDocument {
                    strategy: b.strategy.name().to_string(),
                    values: Some(b.resolved.clone()),
                },
                None => BaselineDocument {
                    strategy: "none".into(),
                    values: None,
                },
            },
            anchor: self.anchor.clone(),
            weights: self.weights.clone(),
            intercept: self.intercept,
            diagnostics: DiagnosticsDocument {
                r_squared: self.diagnostics.r_squared,
                n_evaluations: self.diagnostics.n_evaluations,
                regularized: self.diagnostics.regularized,
                output_class: match self.output {
                    OutputSelector::Score => None,
                    OutputSelector::Class(k) => Some(k),
                },
            },
            engine_version: crate::ENGINE_VERSION.to_string(),
            seed: self.scheme.seed(),
        }
    }

    pub fn from_document(doc: ExplanationDocument) -> Result<Self> {
        let d = doc.anchor.len();
        if doc.weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: doc.weights.len(),
                context: "explanation weights".into(),
            });
        }
        let baseline = match (doc.baseline.strategy.as_str(), doc.baseline.values) {
            ("none", _) => None,
            (name, Some(values)) => {
                if values.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: values.len(),
                        context: "baseline values".into(),
                    });
                }
                let strategy = match name {
                    "zero" => BaselineStrategy::Zero,
                    "reference" => BaselineStrategy::Reference { values: values.clone() },
                    "dataset_median" => BaselineStrategy::DatasetMedian,
                    "dataset_mean" => BaselineStrategy::DatasetMean,
                    other => return Err(Error::parse("baseline.strategy", format!("unknown strategy '{other}'"))),
                };
                Some(BaselineConfig {
                    strategy,
                    resolved: values,
                })
            }
            (_, None) => return Err(Error::parse("baseline.values", "missing baseline values")),
        };
        Ok(Self {
            weights: doc.weights,
            intercept: doc.intercept,
            scheme: doc.scheme,
            baseline,
            anchor: doc.anchor,
            output: doc
                .diagnostics
                .output_class
                .map_or(OutputSelector::Score, OutputSelector::Class),
            diagnostics: Diagnostics {
                r_squared: doc.diagnostics.r_squared,
                n_evaluations: doc.diagnostics.n_evaluations,
                regularized: doc.diagnostics.regularized,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDocument {
    pub strategy: String,
    pub values: Option<DataPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDocument {
    pub r_squared: Option<f64>,
    pub n_evaluations: usize,
    #[serde(default)]
    pub regularized: bool,
    #[serde(default)]
    pub output_class: Option<usize>,
}

/// Wire form of a [`SurrogateExplanation`]; field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationDocument {
    pub scheme: AttributionScheme,
    pub baseline: BaselineDocument,
    pub anchor: DataPoint,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub diagnostics: DiagnosticsDocument,
    pub engine_version: String,
    pub seed: Option<u64>,
}

impl ExplanationDocument {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("explanation documents serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> DataPoint {
        DataPoint::new(v.to_vec())
    }

    #[test]
    fn materialize_selects_coordinates() {
        let x = p(&[5.0, 7.0]);
        let b = p(&[0.0, 0.0]);
        let m = |bits: [bool; 2]| materialize(&BinaryPattern(bits.to_vec()), &x, &b).unwrap();
        assert_eq!(m([true, true]), x);
        assert_eq!(m([false, false]), b);
        assert_eq!(m([true, false]), p(&[5.0, 0.0]));
        assert!(materialize(&BinaryPattern(vec![true]), &x, &b).is_err());
    }

    #[test]
    fn exact_limit_is_enforced() {
        let err = AttributionScheme::ShapleyExact.validate(17, 16).unwrap_err();
        assert!(err.to_string().contains("sampled"));
        assert!(AttributionScheme::BanzhafExact.validate(16, 16).is_ok());
        assert!(AttributionScheme::ShapleySampled {
            n_permutations: 0,
            seed: 1
        }
        .validate(3, 16)
        .is_err());
    }

    #[test]
    fn scheme_json_shape() {
        let s = AttributionScheme::LimeKernel {
            n_samples: 64,
            kernel_width: Some(1.5),
            seed: 7,
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"kind":"lime_kernel","n_samples":64,"kernel_width":1.5,"seed":7}"#
        );
    }
}
