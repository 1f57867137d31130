//! Request documents and their translation into library calls.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{ApiError, ApiResult, Event, EventKind};
use crate::counterfactual::{
    counterfactual_document, diverse_counterfactuals, find_counterfactual, render_contrast, DistanceConfig,
    DistanceKind, SearchConfig, TargetSpec,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fidelity::{classify_analogies, validity_profile, AnalogyConfig, RegionSpec};
use crate::model::Model;
use crate::schema::{DataPoint, Schema};
use crate::surrogate::{
    explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy, ExplanationDocument,
    SurrogateExplanation, DEFAULT_EXACT_LIMIT,
};

/// Deserializes with the failing field path as locus.
fn parse<T: DeserializeOwned>(value: &Value, what: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let locus = if path == "." { what.to_string() } else { format!("{what}.{path}") };
        Error::parse(locus, e.into_inner().to_string())
    })
}

/// Like [`parse`], but failures are configuration errors (422).
fn parse_config<T: DeserializeOwned>(value: &Value, what: &str) -> Result<T> {
    parse(value, what).map_err(|e| match e {
        Error::Parse { locus, message } => Error::config(format!("{locus}: {message}")),
        other => other,
    })
}

fn object<'a>(body: &'a Value, what: &str) -> ApiResult<&'a Map<String, Value>> {
    body.as_object()
        .ok_or_else(|| ApiError::bad_request(format!("{what} must be a JSON object")).with_locus(what))
}

fn reject_unknown(map: &Map<String, Value>, allowed: &[&str], what: &str) -> ApiResult<()> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(ApiError::from(Error::parse(format!("{what}.{k}"), "unknown field"))),
        None => Ok(()),
    }
}

pub(super) struct CreateRequest {
    pub model_doc: Value,
    pub model: Model,
    pub dataset_csv: Option<String>,
    pub dataset: Option<Dataset>,
    pub point: DataPoint,
}

impl CreateRequest {
    pub fn parse(body: &Value) -> ApiResult<Self> {
        let map = object(body, "request")?;
        reject_unknown(map, &["model", "dataset", "point"], "request")?;
        let model_doc = match map.get("model") {
            Some(Value::String(text)) => serde_json::from_str(text).map_err(|e| {
                ApiError::from(Error::parse(
                    format!("model, line {}, column {}", e.line(), e.column()),
                    e.to_string(),
                ))
            })?,
            Some(v) => v.clone(),
            None => return Err(ApiError::from(Error::parse("model", "missing model document"))),
        };
        let model = Model::from_json(&model_doc)?;
        let (dataset_csv, dataset) = match map.get("dataset") {
            None | Some(Value::Null) => (None, None),
            Some(Value::String(csv)) => (
                Some(csv.clone()),
                Some(Dataset::from_csv(model.schema().clone(), csv.as_bytes())?),
            ),
            Some(_) => return Err(ApiError::from(Error::parse("dataset", "expected CSV text"))),
        };
        let point = model.schema().point_from_json(
            map.get("point")
                .ok_or_else(|| ApiError::from(Error::parse("point", "missing initial point")))?,
        )?;
        Ok(CreateRequest {
            model_doc,
            model,
            dataset_csv,
            dataset,
            point,
        })
    }
}

/// Applies `{"edits": {...}}` to `point`.
pub(super) fn apply_edits(model: &Model, point: &DataPoint, body: &Value) -> Result<DataPoint> {
    let schema = model.schema();
    let edits = match body.get("edits") {
        Some(Value::Object(edits)) => edits,
        Some(_) => return Err(Error::parse("edits", "expected an object of feature values")),
        None => return Err(Error::parse("edits", "missing edits")),
    };
    if let Some(extra) = body.as_object().and_then(|m| m.keys().find(|k| *k != "edits")) {
        return Err(Error::parse(extra.clone(), "unknown field"));
    }
    let mut merged = match schema.point_to_json(point) {
        Value::Object(m) => m,
        _ => unreachable!("points render as objects"),
    };
    for (name, value) in edits {
        if schema.index_of(name).is_none() {
            return Err(Error::parse(format!("edits.{name}"), "unknown feature"));
        }
        merged.insert(name.clone(), value.clone());
    }
    schema.point_from_json(&Value::Object(merged))
}

pub(super) fn whatif(model: &Model, current: &DataPoint, body: &Value) -> ApiResult<(DataPoint, Value)> {
    let new_point = apply_edits(model, current, body)?;
    let old = model.score(current)?;
    let new = model.score(&new_point)?;
    let response = json!({
        "old_score": old.score,
        "new_score": new.score,
        "delta": new.score - old.score,
        "old_prediction": old,
        "new_prediction": new,
        "current_point": model.schema().point_to_json(&new_point),
    });
    Ok((new_point, response))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DistanceArg {
    Name(String),
    Kind(DistanceKind),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CounterfactualRequest {
    #[serde(default)]
    target: Option<f64>,
    #[serde(default)]
    target_class: Option<String>,
    #[serde(default)]
    tolerance: Option<f64>,
    #[serde(default)]
    distance: Option<DistanceArg>,
    #[serde(default)]
    locked: Vec<String>,
    #[serde(default)]
    search: Option<Value>,
    #[serde(default)]
    n: Option<usize>,
}

/// Distance family by name (`mad_weighted_l1`, `l2`).
pub(crate) fn distance_kind(name: &str) -> Result<DistanceKind> {
    match name {
        "mad_weighted_l1" | "mad" => Ok(DistanceKind::MadWeightedL1),
        "l2" => Ok(DistanceKind::L2),
        other => Err(Error::config(format!(
            "unknown distance '{other}' (expected mad_weighted_l1, l2 or custom weights)"
        ))),
    }
}

pub(super) fn counterfactual(model: &Model, dataset: Option<&Dataset>, x: &DataPoint, body: &Value) -> ApiResult {
    let req: CounterfactualRequest = parse(body, "request")?;
    let target = TargetSpec {
        target: req.target,
        target_class: req.target_class,
        tolerance: req.tolerance.unwrap_or(crate::counterfactual::DEFAULT_TOLERANCE),
    };
    let kind = match req.distance {
        None => DistanceKind::MadWeightedL1,
        Some(DistanceArg::Name(n)) => distance_kind(&n)?,
        Some(DistanceArg::Kind(k)) => k,
    };
    let scales = dataset.map(Dataset::scales);
    let distance = DistanceConfig::with_locked_names(model.schema(), kind, scales.as_deref(), &req.locked)?;
    let search: SearchConfig = match &req.search {
        Some(v) => parse_config(v, "search")?,
        None => SearchConfig::default(),
    };
    let schema = model.schema();
    let n = req.n.unwrap_or(1);
    if n == 1 {
        let result = find_counterfactual(model, x, &target, &distance, &search)?;
        let statement = render_contrast(x, &result, schema);
        return Ok(counterfactual_document(schema, &result, &statement, &target, &distance, &search));
    }
    let many = diverse_counterfactuals(model, x, &target, &distance, &search, n)?;
    let results: Vec<Value> = many
        .results
        .iter()
        .map(|r| counterfactual_document(schema, r, &render_contrast(x, r, schema), &target, &distance, &search))
        .collect();
    Ok(json!({
        "results": results,
        "requested": many.requested,
        "shortfall": many.shortfall,
        "repulsion": {"rho": many.rho, "delta": many.delta, "heuristic": true},
    }))
}

/// A scheme given as an object (`{"kind": "shapley_exact"}`) or a bare name.
pub(crate) fn parse_scheme(value: &Value) -> Result<AttributionScheme> {
    match value {
        Value::String(name) => parse_config(&json!({ "kind": name }), "scheme"),
        other => parse_config(other, "scheme"),
    }
}

/// A baseline given as `{"strategy": ..., "values": point}` or a bare name.
pub(crate) fn parse_baseline(schema: &Schema, value: &Value, dataset: Option<&Dataset>) -> Result<BaselineConfig> {
    let (name, values) = match value {
        Value::String(name) => (name.as_str(), None),
        Value::Object(m) => (
            m.get("strategy")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::parse("baseline.strategy", "missing strategy"))?,
            m.get("values"),
        ),
        _ => return Err(Error::parse("baseline", "expected a strategy name or object")),
    };
    let strategy = match name {
        "zero" => BaselineStrategy::Zero,
        "dataset_median" | "median" => BaselineStrategy::DatasetMedian,
        "dataset_mean" | "mean" => BaselineStrategy::DatasetMean,
        "reference" => BaselineStrategy::Reference {
            values: schema.point_from_json(
                values.ok_or_else(|| Error::parse("baseline.values", "reference baseline needs values"))?,
            )?,
        },
        other => return Err(Error::config(format!("unknown baseline strategy '{other}'"))),
    };
    BaselineConfig::resolve(schema, strategy, dataset)
}

pub(super) fn attribution(model: &Model, dataset: Option<&Dataset>, x: &DataPoint, body: &Value) -> ApiResult {
    let map = object(body, "request")?;
    reject_unknown(map, &["scheme", "baseline", "exact_limit"], "request")?;
    let scheme = parse_scheme(
        map.get("scheme")
            .ok_or_else(|| ApiError::from(Error::parse("scheme", "missing scheme")))?,
    )?;
    let baseline = match map.get("baseline") {
        Some(v) if scheme.uses_baseline() => Some(parse_baseline(model.schema(), v, dataset)?),
        _ => None,
    };
    let exact_limit = match map.get("exact_limit") {
        None => DEFAULT_EXACT_LIMIT,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ApiError::from(Error::config("exact_limit must be a non-negative integer")))?
            as usize,
    };
    let opts = AttributionOptions {
        exact_limit,
        output: None,
    };
    let e = explain(model, x, &scheme, baseline.as_ref(), &opts)?;
    Ok(e.to_document().to_json())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FidelityRequest {
    #[serde(default)]
    explanation: Option<Value>,
    #[serde(default)]
    explanation_seq: Option<u64>,
    radii: Vec<f64>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default = "default_samples")]
    n_samples: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    analogy_radius: Option<f64>,
    #[serde(default)]
    analogy: Option<AnalogyConfig>,
}

fn default_threshold() -> f64 {
    0.95
}

fn default_samples() -> usize {
    500
}

pub(super) fn fidelity(model: &Model, dataset: Option<&Dataset>, history: &[Event], body: &Value) -> ApiResult {
    let req: FidelityRequest = parse(body, "request")?;
    let doc = match (&req.explanation, req.explanation_seq) {
        (Some(doc), None) => doc.clone(),
        (None, Some(seq)) => history
            .iter()
            .find(|e| e.seq == seq && e.kind == EventKind::Attribution)
            .map(|e| e.response.clone())
            .ok_or_else(|| ApiError::from(Error::config(format!("event {seq} is not an attribution"))))?,
        _ => {
            return Err(ApiError::from(Error::config(
                "give exactly one of explanation and explanation_seq",
            )))
        }
    };
    let doc: ExplanationDocument = parse(&doc, "explanation")?;
    let explanation = SurrogateExplanation::from_document(doc)?;
    let scale = match dataset {
        Some(d) => d.scales(),
        None => vec![1.0; model.dim()],
    };
    let profile = validity_profile(
        model,
        &explanation,
        &scale,
        &req.radii,
        req.threshold,
        req.n_samples,
        req.seed,
    )?;
    let radius = req
        .analogy_radius
        .unwrap_or_else(|| *req.radii.last().expect("validated non-empty"));
    let region = RegionSpec::new(explanation.anchor.clone(), radius, req.n_samples, req.seed, scale);
    let report = classify_analogies(model, &explanation, &region, &req.analogy.unwrap_or_default())?;
    Ok(json!({"profile": profile.to_json(), "analogies": report.to_json()}))
}
