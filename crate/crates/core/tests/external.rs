//! The subprocess model protocol, exercised with a Python echo script.

use posthoc::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy};
use posthoc::DataPoint;

fn echo_model() -> Option<posthoc::Model> {
    if std::process::Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available; skipping");
        return None;
    }
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/echo.json")).unwrap()).unwrap();
    doc["model"]["command"] = format!("python3 {dir}/echo_model.py").into();
    Some(posthoc::load_model(&doc.to_string()).unwrap())
}

#[test]
fn echo_model_scores_and_explains() {
    let Some(model) = echo_model() else { return };
    let x = DataPoint::new(vec![3.5, -1.0]);
    assert_eq!(model.score(&x).unwrap().score, 3.5);
    let batch = model.score_batch(&[x.clone(), DataPoint::new(vec![-2.0, 0.0])]).unwrap();
    assert_eq!(batch.iter().map(|p| p.score).collect::<Vec<_>>(), vec![3.5, -2.0]);

    let zero = BaselineConfig::resolve(model.schema(), BaselineStrategy::Zero, None).unwrap();
    let e = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(&zero), &AttributionOptions::default()).unwrap();
    assert_eq!(e.weights, vec![3.5, 0.0]);
}

#[test]
fn missing_command_is_reported() {
    let doc = r#"{"schema":[{"name":"a","kind":"continuous","lower":0,"upper":1}],
        "model":{"type":"external","command":"/definitely/not/a/program","timeout_ms":1000}}"#;
    let model = posthoc::load_model(doc).unwrap();
    assert!(model.score(&DataPoint::new(vec![0.5])).is_err());
}
