//! Explain a model that lives in another process. The echo script answers
//! every request with the first feature as the score.

use posthoc::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy};
use posthoc::DataPoint;

fn main() -> posthoc::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/echo.json"))?).expect("fixture is JSON");
    doc["model"]["command"] = format!("python3 {dir}/echo_model.py").into();
    let model = posthoc::load_model(&doc.to_string())?;

    let x = DataPoint::new(vec![3.0, -1.0]);
    println!("score {}", model.score(&x)?.score);
    let zero = BaselineConfig::resolve(model.schema(), BaselineStrategy::Zero, None)?;
    let e = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(&zero), &AttributionOptions::default())?;
    println!("shapley {:?} after {} model calls", e.weights, e.diagnostics.n_evaluations);
    Ok(())
}
