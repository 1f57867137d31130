//! Black-box models: a small built-in zoo plus an external subprocess client.
//!
//! Every model maps a [`DataPoint`] to either a single score or a vector of
//! class probabilities. Scoring is pure for the built-in kinds.

mod document;
mod external;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use document::{load_model, ModelDocument};
pub use external::{ExternalClient, DEFAULT_TIMEOUT_MS};

use crate::error::{Error, Result};
use crate::schema::{DataPoint, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Score,
    ClassProbabilities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    #[default]
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative in terms of the pre-activation; relu uses 0 at the kink.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer; `weights` is `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default)]
    pub activation: Activation,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| dot(row, input) + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Goes left when `x[feature] <= threshold`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub feature: usize,
    pub op: CmpOp,
    pub value: f64,
}

/// Conjunction of predicates mapped to an output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub when: Vec<Predicate>,
    pub output: Vec<f64>,
}

impl Rule {
    fn matches(&self, x: &[f64]) -> bool {
        self.when.iter().all(|p| p.op.holds(x[p.feature], p.value))
    }
}

#[derive(Debug, Clone)]
pub enum ModelSpec {
    Linear {
        weights: Vec<f64>,
        bias: f64,
        link: Link,
    },
    Mlp {
        layers: Vec<DenseLayer>,
    },
    Tree {
        nodes: Vec<TreeNode>,
    },
    RuleSet {
        rules: Vec<Rule>,
        default: Vec<f64>,
    },
    External {
        command: String,
        timeout_ms: u64,
        client: Arc<ExternalClient>,
    },
}

impl ModelSpec {
    pub fn type_name(&self) -> &'static str {
        match self {
            ModelSpec::Linear { .. } => "linear",
            ModelSpec::Mlp { .. } => "mlp",
            ModelSpec::Tree { .. } => "tree",
            ModelSpec::RuleSet { .. } => "rules",
            ModelSpec::External { .. } => "external",
        }
    }
}

/// Which scalar of a model's output an explanation or search works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSelector {
    Score,
    Class(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutput {
    /// The score, or for classifiers the probability of the predicted class.
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<String>,
    #[serde(skip)]
    pub predicted_index: Option<usize>,
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub enum GradientMethod {
    Analytic,
    /// Symmetric differences with step `h * scale[k]` (scale defaults to 1).
    CentralDifference { h: f64, scale: Option<Vec<f64>> },
}

impl GradientMethod {
    pub fn central(h: f64) -> Self {
        GradientMethod::CentralDifference { h, scale: None }
    }
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A validated black-box model over a schema.
#[derive(Debug, Clone)]
pub struct Model {
    schema: Schema,
    spec: ModelSpec,
    output: OutputKind,
    classes: Vec<String>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_probabilities(p: &[f64], context: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidModel(format!(
            "{context}: class probabilities {p:?} must lie in [0,1] and sum to 1"
        )));
    }
    Ok(())
}

impl Model {
    /// Builds a model and checks every structural invariant.
    pub fn new(schema: Schema, spec: ModelSpec, output: OutputKind, classes: Vec<String>) -> Result<Self> {
        let d = schema.dim();
        let n_out = match output {
            OutputKind::Score => {
                if !classes.is_empty() {
                    return Err(Error::InvalidModel("score models do not take class labels".into()));
                }
                1
            }
            OutputKind::ClassProbabilities => {
                if classes.len() < 2 {
                    return Err(Error::InvalidModel("classifiers need at least 2 classes".into()));
                }
                classes.len()
            }
        };
        let finite = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("{what} must be finite")))
            }
        };
        match &spec {
            ModelSpec::Linear { weights, bias, link } => {
                schema.check_dim(weights.len(), "linear weights")?;
                finite(weights, "linear weights")?;
                finite(&[*bias], "linear bias")?;
                if output == OutputKind::ClassProbabilities && (n_out != 2 || *link != Link::Logistic) {
                    return Err(Error::InvalidModel(
                        "a linear classifier needs a logistic link and exactly 2 classes".into(),
                    ));
                }
            }
            ModelSpec::Mlp { layers } => {
                if layers.is_empty() {
                    return Err(Error::InvalidModel("mlp needs at least one layer".into()));
                }
                let mut width = d;
                for (i, layer) in layers.iter().enumerate() {
                    if layer.outputs() == 0 || layer.bias.len() != layer.outputs() {
                        return Err(Error::InvalidModel(format!("layer {i}: bias length must equal output width")));
                    }
                    if layer.weights.iter().any(|r| r.len() != width) {
                        return Err(Error::DimensionMismatch {
                            expected: width,
                            got: layer.inputs(),
                            context: format!("mlp layer {i} input width"),
                        });
                    }
                    for row in &layer.weights {
                        finite(row, "mlp weights")?;
                    }
                    finite(&layer.bias, "mlp bias")?;
                    width = layer.outputs();
                }
                if width != n_out {
                    return Err(Error::DimensionMismatch {
                        expected: n_out,
                        got: width,
                        context: "mlp output width".into(),
                    });
                }
            }
            ModelSpec::Tree { nodes } => {
                if nodes.is_empty() {
                    return Err(Error::InvalidModel("tree needs at least one node".into()));
                }
                for (i, node) in nodes.iter().enumerate() {
                    match node {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            if *feature >= d {
                                return Err(Error::InvalidModel(format!(
                                    "node {i}: feature index {feature} out of range"
                                )));
                            }
                            finite(&[*threshold], "tree threshold")?;
                            // children after their parent rules out cycles
                            for c in [left, right] {
                                if *c <= i || *c >= nodes.len() {
                                    return Err(Error::InvalidModel(format!("node {i}: invalid child index {c}")));
                                }
                            }
                        }
                        TreeNode::Leaf { value } => {
                            Self::check_output(value, output, n_out, &format!("tree leaf {i}"))?;
                        }
                    }
                }
            }
            ModelSpec::RuleSet { rules, default } => {
                for (i, rule) in rules.iter().enumerate() {
                    if let Some(p) = rule.when.iter().find(|p| p.feature >= d) {
                        return Err(Error::InvalidModel(format!(
                            "rule {i}: feature index {} out of range",
                            p.feature
                        )));
                    }
                    Self::check_output(&rule.output, output, n_out, &format!("rule {i}"))?;
                }
                Self::check_output(default, output, n_out, "default rule")?;
            }
            ModelSpec::External { timeout_ms, .. } => {
                if *timeout_ms == 0 {
                    return Err(Error::InvalidModel("external timeout must be positive".into()));
                }
            }
        }
        Ok(Self {
            schema,
            spec,
            output,
            classes,
        })
    }

    fn check_output(value: &[f64], output: OutputKind, n_out: usize, context: &str) -> Result<()> {
        if value.len() != n_out {
            return Err(Error::DimensionMismatch {
                expected: n_out,
                got: value.len(),
                context: context.to_string(),
            });
        }
        match output {
            OutputKind::Score if !value[0].is_finite() => {
                Err(Error::InvalidModel(format!("{context}: score must be finite")))
            }
            OutputKind::ClassProbabilities => check_probabilities(value, context),
            _ => Ok(()),
        }
    }

    pub fn linear(schema: Schema, weights: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(
            schema,
            ModelSpec::Linear {
                weights,
                bias,
                link: Link::Identity,
            },
            OutputKind::Score,
            vec![],
        )
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn output_kind(&self) -> OutputKind {
        self.output
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    /// Raw output: one score, or one probability per class.
    pub fn raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.schema.check_dim(x.len(), "model input")?;
        let out = match &self.spec {
            ModelSpec::Linear { weights, bias, link } => {
                let z = dot(weights, x) + bias;
                match (link, self.output) {
                    (Link::Identity, _) => vec![z],
                    (Link::Logistic, OutputKind::Score) => vec![sigmoid(z)],
                    (Link::Logistic, OutputKind::ClassProbabilities) => {
                        let p = sigmoid(z);
                        vec![1.0 - p, p]
                    }
                }
            }
            ModelSpec::Mlp { layers } => {
                let mut h = x.to_vec();
                for layer in layers {
                    h = layer
                        .pre_activation(&h)
                        .into_iter()
                        .map(|z| layer.activation.apply(z))
                        .collect();
                }
                match self.output {
                    OutputKind::Score => h,
                    OutputKind::ClassProbabilities => softmax(&h),
                }
            }
            ModelSpec::Tree { nodes } => {
                let mut i = 0;
                loop {
                    match &nodes[i] {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => i = if x[*feature] <= *threshold { *left } else { *right },
                        TreeNode::Leaf { value } => break value.clone(),
                    }
                }
            }
            ModelSpec::RuleSet { rules, default } => rules
                .iter()
                .find(|r| r.matches(x))
                .map_or_else(|| default.clone(), |r| r.output.clone()),
            ModelSpec::External { client, .. } => client.request(x, self.output, self.classes.len())?,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite output {out:?}")));
        }
        Ok(out)
    }

    /// Scores a schema-conforming point.
    pub fn score(&self, x: &DataPoint) -> Result<PredictionOutput> {
        self.schema.validate(x)?;
        let raw = self.raw(x.values())?;
        Ok(self.to_prediction(raw))
    }

    fn to_prediction(&self, raw: Vec<f64>) -> PredictionOutput {
        match self.output {
            OutputKind::Score => PredictionOutput {
                score: raw[0],
                probabilities: None,
                predicted_class: None,
                predicted_index: None,
            },
            OutputKind::ClassProbabilities => {
                let k = argmax(&raw);
                PredictionOutput {
                    score: raw[k],
                    predicted_class: Some(self.classes[k].clone()),
                    predicted_index: Some(k),
                    probabilities: Some(raw),
                }
            }
        }
    }

    /// Elementwise [`Model::score`]; the first failing row is reported by index.
    pub fn score_batch(&self, xs: &[DataPoint]) -> Result<Vec<PredictionOutput>> {
        xs.iter()
            .enumerate()
            .map(|(index, x)| {
                self.score(x).map_err(|e| Error::Batch {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Default scalar for explanations: the score, or the probability of
    /// the class predicted at `anchor`.
    pub fn default_selector(&self, anchor: &[f64]) -> Result<OutputSelector> {
        Ok(match self.output {
            OutputKind::Score => OutputSelector::Score,
            OutputKind::ClassProbabilities => OutputSelector::Class(argmax(&self.raw(anchor)?)),
        })
    }

    /// The selected scalar at `x` without schema validation; callers that
    /// materialize points themselves use this on the hot path.
    pub fn scalar(&self, x: &[f64], selector: OutputSelector) -> Result<f64> {
        let raw = self.raw(x)?;
        Ok(match selector {
            OutputSelector::Score => raw[0],
            OutputSelector::Class(k) => *raw
                .get(k)
                .ok_or_else(|| Error::config(format!("class index {k} out of range")))?,
        })
    }

    pub fn supports_analytic_gradient(&self) -> bool {
        matches!(self.spec, ModelSpec::Linear { .. } | ModelSpec::Mlp { .. })
    }

    /// Gradient of the selected scalar with respect to the input.
    pub fn gradient(&self, x: &[f64], method: &GradientMethod, selector: OutputSelector) -> Result<Vec<f64>> {
        self.schema.check_dim(x.len(), "gradient input")?;
        match method {
            GradientMethod::Analytic => self.analytic_gradient(x, selector),
            GradientMethod::CentralDifference { h, scale } => {
                if !(*h > 0.0) || !h.is_finite() {
                    return Err(Error::config("finite-difference step must be positive"));
                }
                if let Some(s) = scale {
                    self.schema.check_dim(s.len(), "finite-difference scale")?;
                }
                let mut probe = x.to_vec();
                (0..x.len())
                    .map(|k| {
                        let step = h * scale.as_ref().map_or(1.0, |s| s[k]);
                        probe[k] = x[k] + step;
                        let up = self.scalar(&probe, selector)?;
                        probe[k] = x[k] - step;
                        let down = self.scalar(&probe, selector)?;
                        probe[k] = x[k];
                        Ok((up - down) / (2.0 * step))
                    })
                    .collect()
            }
        }
    }

    fn analytic_gradient(&self, x: &[f64], selector: OutputSelector) -> Result<Vec<f64>> {
        match &self.spec {
            ModelSpec::Linear { weights, bias, link } => {
                let factor = match link {
                    Link::Identity => 1.0,
                    Link::Logistic => {
                        let p = sigmoid(dot(weights, x) + bias);
                        let dp = p * (1.0 - p);
                        match selector {
                            OutputSelector::Class(0) => -dp,
                            _ => dp,
                        }
                    }
                };
                Ok(weights.iter().map(|w| w * factor).collect())
            }
            ModelSpec::Mlp { layers } => {
                let mut inputs = vec![x.to_vec()];
                let mut pre = Vec::with_capacity(layers.len());
                for layer in layers {
                    let z = layer.pre_activation(inputs.last().unwrap());
                    inputs.push(z.iter().map(|&v| layer.activation.apply(v)).collect());
                    pre.push(z);
                }
                let out = inputs.last().unwrap();
                // d(selected scalar)/d(final activations)
                let mut upstream = match (self.output, selector) {
                    (OutputKind::ClassProbabilities, OutputSelector::Class(k)) => {
                        let p = softmax(out);
                        (0..p.len())
                            .map(|j| p[k] * (if j == k { 1.0 } else { 0.0 } - p[j]))
                            .collect::<Vec<_>>()
                    }
                    _ => vec![1.0],
                };
                for (layer, z) in layers.iter().zip(&pre).rev() {
                    let delta: Vec<f64> = upstream
                        .iter()
                        .zip(z)
                        .map(|(u, &zi)| u * layer.activation.derivative(zi))
                        .collect();
                    upstream = (0..layer.inputs())
                        .map(|j| layer.weights.iter().zip(&delta).map(|(row, dl)| row[j] * dl).sum())
                        .collect();
                }
                Ok(upstream)
            }
            other => Err(Error::Unsupported(format!(
                "analytic gradient is not available for {} models; request central differences",
                other.type_name()
            ))),
        }
    }
}
