//! "If your data had looked like this" statements.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CounterfactualResult;
use crate::schema::{DataPoint, FeatureKind, FeatureSpec, Schema};

/// Changes smaller than this are not reported.
pub const CHANGE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChange {
    pub name: String,
    pub from: Value,
    pub to: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastStatement {
    pub text: String,
    pub changed_features: Vec<FeatureChange>,
}

/// Renders the contrast between `x` and the counterfactual in schema order.
pub fn render_contrast(x: &DataPoint, result: &CounterfactualResult, schema: &Schema) -> ContrastStatement {
    let mut changes = Vec::new();
    let mut clauses = Vec::new();
    for (k, f) in schema.features().iter().enumerate() {
        let (from, to) = (x[k], result.c[k]);
        let changed = match f.kind {
            FeatureKind::Categorical => from != to,
            _ => (to - from).abs() > CHANGE_EPSILON,
        };
        if !changed {
            continue;
        }
        clauses.push(format!(
            "{} had been {} (instead of {})",
            f.name,
            show(f, to),
            show(f, from)
        ));
        changes.push(FeatureChange {
            name: f.name.clone(),
            from: json_value(f, from),
            to: json_value(f, to),
        });
    }

    let outcome = |c: bool| match (&result.class_at_c, &result.class_at_x) {
        (Some(cc), Some(cx)) if c => format!("the classification would have been {cc} (instead of {cx})"),
        (Some(_), Some(cx)) => format!("the classification is already {cx}"),
        _ if c => format!(
            "you would have received score {} (instead of {})",
            format_number(result.score_at_c),
            format_number(result.score_at_x)
        ),
        _ => format!("you already receive score {}", format_number(result.score_at_x)),
    };

    let text = if clauses.is_empty() {
        format!("No change required: {}.", outcome(false))
    } else {
        format!("If {}, {}.", clauses.join(" and "), outcome(true))
    };
    ContrastStatement {
        text,
        changed_features: changes,
    }
}

fn show(f: &FeatureSpec, v: f64) -> String {
    match f.kind {
        FeatureKind::Categorical => f.display_value(v),
        _ => format_number(v),
    }
}

fn json_value(f: &FeatureSpec, v: f64) -> Value {
    match f.kind {
        FeatureKind::Categorical => Value::String(f.display_value(v)),
        _ => serde_json::json!(v),
    }
}

/// Whole numbers print without decimals; others with at most four.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}
