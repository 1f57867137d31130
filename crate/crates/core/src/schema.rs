//! Typed tabular feature spaces.
//!
//! A [`Schema`] fixes the canonical order of features; every [`DataPoint`]
//! is a plain vector of reals in that order. Categorical values are stored
//! as category indices and count values as whole numbers.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Count,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            lower: None,
            upper: None,
            categories: Vec::new(),
        }
    }

    pub fn count(name: impl Into<String>) -> Self {
        Self {
            kind: FeatureKind::Count,
            ..Self::continuous(name)
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            ..Self::continuous(name)
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = Some(lower);
        self.upper = Some(upper);
        self
    }

    /// Effective lower bound (categoricals are bounded by their index range).
    pub fn min_value(&self) -> f64 {
        match self.kind {
            FeatureKind::Categorical => 0.0,
            _ => self.lower.unwrap_or(f64::NEG_INFINITY),
        }
    }

    pub fn max_value(&self) -> f64 {
        match self.kind {
            FeatureKind::Categorical => (self.categories.len() - 1) as f64,
            _ => self.upper.unwrap_or(f64::INFINITY),
        }
    }

    /// True for features that only take whole-number values.
    pub fn is_discrete(&self) -> bool {
        self.kind != FeatureKind::Continuous
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::parse("schema", "feature name must not be empty"));
        }
        for bound in [self.lower, self.upper].into_iter().flatten() {
            if !bound.is_finite() {
                return Err(self.invalid("bounds must be finite"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo > hi {
                return Err(self.invalid(format!("lower bound {lo} exceeds upper bound {hi}")));
            }
        }
        match self.kind {
            FeatureKind::Categorical if self.categories.len() < 2 => {
                Err(self.invalid("categorical features need at least 2 categories"))
            }
            FeatureKind::Continuous | FeatureKind::Count if !self.categories.is_empty() => {
                Err(self.invalid("only categorical features carry categories"))
            }
            _ => Ok(()),
        }
    }

    /// Checks a single value against kind and bounds.
    pub fn check_value(&self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(self.invalid(format!("value {value} is not finite")));
        }
        if self.is_discrete() && value.fract() != 0.0 {
            return Err(self.invalid(format!("value {value} is not a whole number")));
        }
        if value < self.min_value() || value > self.max_value() {
            return Err(self.invalid(format!(
                "value {value} outside [{}, {}]",
                self.min_value(),
                self.max_value()
            )));
        }
        Ok(())
    }

    /// Clamps into bounds and rounds discrete kinds.
    pub fn project(&self, value: f64) -> f64 {
        let v = if self.is_discrete() { value.round() } else { value };
        v.clamp(self.min_value(), self.max_value())
    }

    pub(crate) fn invalid(&self, message: impl Into<String>) -> Error {
        Error::InvalidValue {
            feature: self.name.clone(),
            message: message.into(),
        }
    }

    fn value_from_json(&self, value: &Value) -> Result<f64> {
        let v = match (value, self.kind) {
            (Value::String(label), FeatureKind::Categorical) => self
                .categories
                .iter()
                .position(|c| c == label)
                .ok_or_else(|| self.invalid(format!("unknown category '{label}'")))?
                as f64,
            (Value::Number(n), _) => n
                .as_f64()
                .ok_or_else(|| self.invalid("number out of range"))?,
            _ => return Err(self.invalid(format!("expected a number, got {value}"))),
        };
        self.check_value(v)?;
        Ok(v)
    }

    /// Renders a value for humans: category label, whole number, or real.
    pub fn display_value(&self, value: f64) -> String {
        match self.kind {
            FeatureKind::Categorical => self
                .categories
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| value.to_string()),
            _ => format!("{value}"),
        }
    }

    fn value_to_json(&self, value: f64) -> Value {
        match self.kind {
            FeatureKind::Categorical => Value::String(self.display_value(value)),
            _ => serde_json::json!(value),
        }
    }
}

/// An ordered list of features; the order is the vector order of every point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureSpec>", into = "Vec<FeatureSpec>")]
pub struct Schema {
    features: Vec<FeatureSpec>,
}

impl TryFrom<Vec<FeatureSpec>> for Schema {
    type Error = Error;

    fn try_from(features: Vec<FeatureSpec>) -> Result<Self> {
        Schema::new(features)
    }
}

impl From<Schema> for Vec<FeatureSpec> {
    fn from(schema: Schema) -> Self {
        schema.features
    }
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::parse("schema", "schema needs at least one feature"));
        }
        for (i, f) in features.iter().enumerate() {
            f.validate()?;
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::parse(
                    format!("schema[{i}].name"),
                    format!("duplicate feature name '{}'", f.name),
                ));
            }
        }
        Ok(Self { features })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn check_dim(&self, got: usize, context: &str) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
                context: context.to_string(),
            });
        }
        Ok(())
    }

    pub fn validate(&self, point: &DataPoint) -> Result<()> {
        self.check_dim(point.len(), "data point")?;
        self.features
            .iter()
            .zip(point.values())
            .try_for_each(|(f, &v)| f.check_value(v))
    }

    /// Projects an arbitrary vector into the feasible box of the schema.
    pub fn project(&self, values: &mut [f64]) {
        for (f, v) in self.features.iter().zip(values.iter_mut()) {
            *v = f.project(*v);
        }
    }

    /// Parses a point given either as `{"name": value, ...}` or as an array
    /// in schema order. Categorical values may be labels or indices.
    pub fn point_from_json(&self, value: &Value) -> Result<DataPoint> {
        let values = match value {
            Value::Object(map) => {
                if let Some(unknown) = map.keys().find(|k| self.index_of(k).is_none()) {
                    return Err(Error::parse(unknown.clone(), "unknown feature"));
                }
                self.features
                    .iter()
                    .map(|f| {
                        let v = map
                            .get(&f.name)
                            .ok_or_else(|| f.invalid("missing value"))?;
                        f.value_from_json(v)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Value::Array(items) => {
                self.check_dim(items.len(), "input array")?;
                self.features
                    .iter()
                    .zip(items)
                    .map(|(f, v)| f.value_from_json(v))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => return Err(Error::parse("input", "expected an object or array")),
        };
        Ok(DataPoint::new(values))
    }

    /// Renders a point as `{"name": value}` in schema order.
    pub fn point_to_json(&self, point: &DataPoint) -> Value {
        let map: Map<String, Value> = self
            .features
            .iter()
            .zip(point.values())
            .map(|(f, &v)| (f.name.clone(), f.value_to_json(v)))
            .collect();
        Value::Object(map)
    }
}

/// A point in feature space, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataPoint(Vec<f64>);

impl DataPoint {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for DataPoint {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl std::ops::Index<usize> for DataPoint {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}
