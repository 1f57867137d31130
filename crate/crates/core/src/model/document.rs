//! JSON model-spec documents.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    CmpOp, DenseLayer, ExternalClient, Link, Model, ModelSpec, OutputKind, Predicate, Rule, TreeNode,
    DEFAULT_TIMEOUT_MS,
};
use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSpec, Schema};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }

    fn from_vec(v: &[f64]) -> Self {
        if v.len() == 1 {
            OneOrMany::One(v[0])
        } else {
            OneOrMany::Many(v.to_vec())
        }
    }

    fn len(&self) -> usize {
        match self {
            OneOrMany::One(_) => 1,
            OneOrMany::Many(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeDoc {
    Split {
        feature: FeatureRef,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: OneOrMany,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateDoc {
    pub feature: FeatureRef,
    pub op: CmpOp,
    /// A number, or a category label for categorical features.
    pub value: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDoc {
    pub when: Vec<PredicateDoc>,
    pub output: OneOrMany,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_MS
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearBody {
    pub weights: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    #[serde(default)]
    pub link: Link,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpBody {
    pub layers: Vec<DenseLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeBody {
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesBody {
    pub rules: Vec<RuleDoc>,
    pub default: OneOrMany,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBody {
    pub command: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelBody {
    Linear(LinearBody),
    Mlp(MlpBody),
    Tree(TreeBody),
    Rules(RulesBody),
    External(ExternalBody),
}

fn default_output() -> OutputKind {
    OutputKind::Score
}

/// Top-level model-spec document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema: Vec<FeatureSpec>,
    pub model: ModelBody,
    #[serde(default = "default_output")]
    pub output: OutputKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
}

const MODEL_TYPES: [&str; 5] = ["linear", "mlp", "tree", "rules", "external"];

/// Parses and validates a model-spec document.
pub fn load_model(text: &str) -> Result<Model> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
    Model::from_json(&value)
}

fn de<T: serde::de::DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let locus = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        Error::parse(locus, e.into_inner().to_string())
    })
}

fn resolve_feature(schema: &Schema, r: &FeatureRef, locus: &str) -> Result<usize> {
    match r {
        FeatureRef::Index(i) if *i < schema.dim() => Ok(*i),
        FeatureRef::Index(i) => Err(Error::parse(locus, format!("feature index {i} out of range"))),
        FeatureRef::Name(n) => schema
            .index_of(n)
            .ok_or_else(|| Error::parse(locus, format!("unknown feature '{n}'"))),
    }
}

impl Model {
    pub fn from_json(value: &Value) -> Result<Model> {
        match value.pointer("/model/type") {
            Some(Value::String(t)) if !MODEL_TYPES.contains(&t.as_str()) => {
                return Err(Error::UnknownModelType(t.clone()))
            }
            Some(Value::String(_)) => {}
            _ => return Err(Error::parse("model.type", "missing model type")),
        }
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
        if let Some(k) = obj.keys().find(|k| !["schema", "model", "output", "classes"].contains(&k.as_str())) {
            return Err(Error::parse(k.clone(), "unknown field"));
        }
        let mut body = value["model"].clone();
        let kind = body
            .as_object_mut()
            .and_then(|m| m.remove("type"))
            .and_then(|t| t.as_str().map(str::to_string))
            .unwrap_or_default();
        let model = match kind.as_str() {
            "linear" => ModelBody::Linear(de(&body, "model")?),
            "mlp" => ModelBody::Mlp(de(&body, "model")?),
            "tree" => ModelBody::Tree(de(&body, "model")?),
            "rules" => ModelBody::Rules(de(&body, "model")?),
            _ => ModelBody::External(de(&body, "model")?),
        };
        let doc = ModelDocument {
            schema: de(obj.get("schema").unwrap_or(&Value::Null), "schema")?,
            model,
            output: match obj.get("output") {
                Some(v) => de(v, "output")?,
                None => OutputKind::Score,
            },
            classes: match obj.get("classes") {
                Some(v) => de(v, "classes")?,
                None => Vec::new(),
            },
        };
        Model::from_document(doc)
    }

    pub fn from_document(doc: ModelDocument) -> Result<Model> {
        let schema = Schema::new(doc.schema)?;
        let classes = if doc.output == OutputKind::ClassProbabilities && doc.classes.is_empty() {
            let k = match &doc.model {
                ModelBody::Linear(_) => 2,
                ModelBody::Mlp(MlpBody { layers }) => layers.last().map_or(0, DenseLayer::outputs),
                ModelBody::Tree(TreeBody { nodes }) => nodes
                    .iter()
                    .find_map(|n| match n {
                        NodeDoc::Leaf { leaf } => Some(leaf.len()),
                        _ => None,
                    })
                    .unwrap_or(0),
                ModelBody::Rules(RulesBody { default, .. }) => default.len(),
                ModelBody::External(_) => {
                    return Err(Error::parse("classes", "external classifiers must list their classes"))
                }
            };
            (0..k).map(|i| format!("class_{i}")).collect()
        } else {
            doc.classes
        };
        let spec = match doc.model {
            ModelBody::Linear(LinearBody { weights, bias, link }) => ModelSpec::Linear { weights, bias, link },
            ModelBody::Mlp(MlpBody { layers }) => ModelSpec::Mlp { layers },
            ModelBody::Tree(TreeBody { nodes }) => ModelSpec::Tree {
                nodes: nodes
                    .into_iter()
                    .enumerate()
                    .map(|(i, n)| {
                        Ok(match n {
                            NodeDoc::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => TreeNode::Split {
                                feature: resolve_feature(&schema, &feature, &format!("model.nodes[{i}].feature"))?,
                                threshold,
                                left,
                                right,
                            },
                            NodeDoc::Leaf { leaf } => TreeNode::Leaf { value: leaf.into_vec() },
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            ModelBody::Rules(RulesBody { rules, default }) => ModelSpec::RuleSet {
                rules: rules
                    .into_iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let when = r
                            .when
                            .iter()
                            .enumerate()
                            .map(|(j, p)| {
                                let locus = format!("model.rules[{i}].when[{j}]");
                                let feature = resolve_feature(&schema, &p.feature, &locus)?;
                                let spec = schema.feature(feature);
                                let value = match &p.value {
                                    Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                                    Value::String(s) if spec.kind == FeatureKind::Categorical => spec
                                        .categories
                                        .iter()
                                        .position(|c| c == s)
                                        .ok_or_else(|| Error::parse(&locus, format!("unknown category '{s}'")))?
                                        as f64,
                                    other => return Err(Error::parse(locus, format!("bad predicate value {other}"))),
                                };
                                Ok(Predicate {
                                    feature,
                                    op: p.op,
                                    value,
                                })
                            })
                            .collect::<Result<_>>()?;
                        Ok(Rule {
                            when,
                            output: r.output.into_vec(),
                        })
                    })
                    .collect::<Result<_>>()?,
                default: default.into_vec(),
            },
            ModelBody::External(ExternalBody { command, timeout_ms }) => ModelSpec::External {
                client: Arc::new(ExternalClient::new(command.clone(), timeout_ms)),
                command,
                timeout_ms,
            },
        };
        Model::new(schema, spec, doc.output, classes)
    }

    pub fn to_document(&self) -> ModelDocument {
        let name = |i: usize| FeatureRef::Name(self.schema.feature(i).name.clone());
        let model = match &self.spec {
            ModelSpec::Linear { weights, bias, link } => ModelBody::Linear(LinearBody {
                weights: weights.clone(),
                bias: *bias,
                link: *link,
            }),
            ModelSpec::Mlp { layers } => ModelBody::Mlp(MlpBody { layers: layers.clone() }),
            ModelSpec::Tree { nodes } => ModelBody::Tree(TreeBody {
                nodes: nodes
                    .iter()
                    .map(|n| match n {
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeDoc::Split {
                            feature: name(*feature),
                            threshold: *threshold,
                            left: *left,
                            right: *right,
                        },
                        TreeNode::Leaf { value } => NodeDoc::Leaf {
                            leaf: OneOrMany::from_vec(value),
                        },
                    })
                    .collect(),
            }),
            ModelSpec::RuleSet { rules, default } => ModelBody::Rules(RulesBody {
                rules: rules
                    .iter()
                    .map(|r| RuleDoc {
                        when: r
                            .when
                            .iter()
                            .map(|p| PredicateDoc {
                                feature: name(p.feature),
                                op: p.op,
                                value: serde_json::json!(p.value),
                            })
                            .collect(),
                        output: OneOrMany::from_vec(&r.output),
                    })
                    .collect(),
                default: OneOrMany::from_vec(default),
            }),
            ModelSpec::External { command, timeout_ms, .. } => ModelBody::External(ExternalBody {
                command: command.clone(),
                timeout_ms: *timeout_ms,
            }),
        };
        ModelDocument {
            schema: self.schema.features().to_vec(),
            model,
            output: self.output,
            classes: self.classes.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn minimal_linear_spec() {
        let m = load_model(
            r#"{"schema":[{"name":"a","kind":"continuous"},{"name":"b","kind":"continuous"}],
                "model":{"type":"linear","weights":[1,2],"bias":0,"link":"identity"}}"#,
        )
        .unwrap();
        assert_eq!(m.dim(), 2);
    }

    #[test]
    fn weight_count_mismatch() {
        let err = load_model(
            r#"{"schema":[{"name":"a","kind":"continuous"},{"name":"b","kind":"continuous"}],
                "model":{"type":"linear","weights":[1,2,3]}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 3, .. }));
    }

    #[test]
    fn unknown_type_and_syntax_errors() {
        let err = load_model(r#"{"schema":[{"name":"a","kind":"continuous"}],"model":{"type":"svm"}}"#).unwrap_err();
        assert!(matches!(err, Error::UnknownModelType(t) if t == "svm"));
        let err = load_model("{\n  \"schema\": [,\n}").unwrap_err();
        assert!(matches!(err, Error::Parse { ref locus, .. } if locus.starts_with("line 2")));
    }

    #[test]
    fn field_errors_carry_a_path() {
        let err = load_model(
            r#"{"schema":[{"name":"a","kind":"continuous"}],
                "model":{"type":"mlp","layers":[{"weights":[[1]],"bias":"x"}]}}"#,
        )
        .unwrap_err();
        match err {
            Error::Parse { locus, .. } => assert!(locus.contains("layers[0].bias"), "{locus}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn document_round_trip() {
        let doc = json!({
            "schema": [{"name":"legs","kind":"count","lower":0.0,"upper":10.0},
                       {"name":"wings","kind":"count","lower":0.0,"upper":6.0}],
            "model": {"type":"rules","rules":[
                {"when":[{"feature":"wings","op":"eq","value":0.0},{"feature":"legs","op":"eq","value":8.0}],"output":[0.0,0.0,1.0]}],
                "default":[1.0,0.0,0.0]},
            "output": "class_probabilities",
            "classes": ["bee","fly","spider"]
        });
        let m = Model::from_json(&doc).unwrap();
        let back = serde_json::to_value(m.to_document()).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn class_probabilities_must_normalize() {
        let err = load_model(
            r#"{"schema":[{"name":"a","kind":"continuous"}],
                "model":{"type":"rules","rules":[],"default":[0.6,0.6]},
                "output":"class_probabilities"}"#,
        );
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }
}
