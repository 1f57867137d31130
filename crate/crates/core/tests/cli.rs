//! Command-line behaviour: golden outputs and exit codes.
//!
//! Set `UPDATE_GOLDEN=1` to rewrite the files under `tests/golden`.

mod common;

use common::cli::{check_golden, fixture, golden_cases, invoke};
use posthoc::cli::{EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE};

#[test]
fn golden_outputs_are_stable() {
    let failures: Vec<String> = golden_cases()
        .iter()
        .filter_map(|(name, args)| check_golden(name, args, 3).err())
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn documented_examples_hold() {
    let cases = golden_cases();
    let output = |name: &str| -> serde_json::Value {
        let (_, args) = cases.iter().find(|(n, _)| *n == name).unwrap();
        serde_json::from_str(&invoke(args).1).unwrap()
    };
    assert_eq!(output("predict_bee.json")["predicted_class"], "bee");
    assert_eq!(output("attr_shapley_and.json")["weights"], serde_json::json!([0.5, 0.5]));
    let cf = output("cf_linear.json");
    for k in ["x1", "x2"] {
        let c = cf["counterfactual"][k].as_f64().unwrap();
        assert!((c - 0.5).abs() < 0.01, "{k} = {c}");
    }
}

#[test]
fn bench_reads_fixture_directory() {
    let dir = fixture("");
    let (code, from_dir) = invoke(&["bench", "--seed", "7", "--samples", "100", "--fixtures", &dir]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(from_dir, invoke(&["bench", "--seed", "7", "--samples", "100"]).1);
    let (code, out) = invoke(&["bench", "--seed", "7", "--fixtures", "/definitely/not/here"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(out.is_empty());
}

#[test]
fn exit_codes() {
    let m = fixture("and.json");
    assert_eq!(invoke(&["no-such-command"]).0, EXIT_USAGE);
    assert_eq!(invoke(&["--help"]).0, EXIT_OK);
    // a sampled scheme without a seed
    let (code, out) = invoke(&["explain-attr", "--scheme", "lime", "--baseline", "zero", "--model", &m, "--input",
        r#"{"z1":1,"z2":1}"#]);
    assert_eq!(code, EXIT_USAGE);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["error"]["code"], "usage");
    // out-of-bounds input
    let (code, out) = invoke(&["predict", "--model", &m, "--input", r#"{"z1":1,"z2":5}"#]);
    assert_eq!(code, EXIT_INPUT);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["error"]["locus"], "z2");
    // malformed JSON, strict mode keeps stdout clean
    let (code, out) = invoke(&["predict", "--model", &m, "--input", "{", "--strict"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(out.is_empty());
    // missing model file
    assert_eq!(invoke(&["predict", "--model", "/nope.json", "--input", "{}"]).0, EXIT_INPUT);
    // exact enumeration over the limit
    let k = fixture("kink.json");
    let (code, _) = invoke(&["explain-attr", "--scheme", "shapley", "--baseline", "zero", "--exact-limit", "4",
        "--model", &k, "--input", r#"{"k1":0,"k2":0,"k3":0,"k4":0,"k5":0,"k6":0,"k7":0,"k8":0}"#]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn strict_counterfactual_reports_non_convergence() {
    let m = fixture("linear.json");
    let args = ["explain-cf", "--model", &m, "--input", r#"{"x1":0,"x2":0}"#, "--target", "100", "--seed", "1"];
    let (code, out) = invoke(&args);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["converged"], false);
    let mut strict = args.to_vec();
    strict.push("--strict");
    let (code, out) = invoke(&strict);
    assert_eq!(code, EXIT_NOT_CONVERGED);
    assert!(out.is_empty());
}

#[test]
fn cli_matches_library() {
    use posthoc::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy};
    let m = fixture("or_and3.json");
    let (_, out) = invoke(&["explain-attr", "--scheme", "banzhaf", "--baseline", "zero", "--model", &m, "--input",
        r#"{"z1":1,"z2":1,"z3":1}"#]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let model = posthoc::fixtures::find("or_and3").unwrap().load_model().unwrap();
    let b = BaselineConfig::resolve(model.schema(), BaselineStrategy::Zero, None).unwrap();
    let x = posthoc::DataPoint::new(vec![1.0; 3]);
    let e = explain(&model, &x, &AttributionScheme::BanzhafExact, Some(&b), &AttributionOptions::default()).unwrap();
    let cli: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
    assert_eq!(cli, e.weights);
    assert_eq!(cli[0], 0.75);
}
