//! In-process CLI invocation and the golden-file cases.

use std::path::PathBuf;

pub fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn invoke<S: AsRef<str>>(args: &[S]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("posthoc").chain(args.iter().map(AsRef::as_ref));
    let code = posthoc::cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Golden file name and the arguments that produce it.
pub fn golden_cases() -> Vec<(&'static str, Vec<String>)> {
    let f = fixture;
    let zeros8 = r#"{"k1":0,"k2":0,"k3":0,"k4":0,"k5":0,"k6":0,"k7":0,"k8":0}"#;
    vec![
        ("predict_bee.json", a(&["predict", "--model", &f("bee.json"), "--input", r#"{"legs":6,"wings":4}"#])),
        ("predict_loan.csv", a(&["predict", "--model", &f("loan.json"), "--data", &f("loan.csv"), "--format", "csv"])),
        (
            "attr_shapley_and.json",
            a(&["explain-attr", "--scheme", "shapley", "--baseline", "zero", "--model", &f("and.json"), "--input",
                r#"{"z1":1,"z2":1}"#, "--seed", "7"]),
        ),
        (
            "attr_lime_tanh.csv",
            a(&["explain-attr", "--scheme", "lime", "--baseline", "zero", "--samples", "64", "--seed", "3",
                "--model", &f("tanh_mlp.json"), "--input", r#"{"a":0.5,"b":-0.5}"#, "--format", "csv"]),
        ),
        (
            "cf_linear.json",
            a(&["explain-cf", "--model", &f("linear.json"), "--input", r#"{"x1":0,"x2":0}"#, "--target", "1",
                "--distance", "l2", "--seed", "7"]),
        ),
        (
            "cf_bee.json",
            a(&["explain-cf", "--model", &f("bee.json"), "--input", r#"{"legs":6,"wings":4}"#, "--target-class",
                "fly", "--lock", "legs", "--seed", "1"]),
        ),
        (
            "fidelity_kink.csv",
            a(&["fidelity", "--model", &f("kink.json"), "--data", &f("kink.csv"), "--input", zeros8, "--scheme",
                "gradient", "--radii", "1,2,3", "--samples", "300", "--seed", "5", "--format", "csv"]),
        ),
        (
            "compare_or_and3.json",
            a(&["compare", "--model", &f("or_and3.json"), "--input", r#"{"z1":1,"z2":1,"z3":1}"#, "--scheme",
                "shapley,banzhaf,edge", "--baseline", "zero"]),
        ),
        (
            "casebase_loan.json",
            a(&["casebase", "--model", &f("loan.json"), "--data", &f("loan.csv"), "--input",
                r#"{"income":50,"debt":10}"#, "--k", "3"]),
        ),
        (
            "tree_region.csv",
            a(&["tree-surrogate", "--model", &f("region_tree.json"), "--max-depth", "2", "--samples", "400",
                "--seed", "9", "--format", "csv"]),
        ),
        ("bench_seed7.csv", a(&["bench", "--seed", "7"])),
    ]
}

fn a(args: &[&str]) -> Vec<String> {
    args.iter().map(|s| s.to_string()).collect()
}

/// Runs a golden case `runs` times. Returns an error message if the output
/// varies between runs, the exit code is not 0, or the output differs
/// from the stored file. `UPDATE_GOLDEN=1` rewrites the file first.
pub fn check_golden(name: &str, args: &[String], runs: usize) -> Result<(), String> {
    let (code, first) = invoke(args);
    if code != 0 {
        return Err(format!("{name}: exit {code}: {first}"));
    }
    for _ in 1..runs {
        if invoke(args).1 != first {
            return Err(format!("{name}: output changed between runs"));
        }
    }
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &first).map_err(|e| e.to_string())?;
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e}; run with UPDATE_GOLDEN=1 to create it", path.display()))?;
    if first != expected {
        return Err(format!("{name}: differs from {}", path.display()));
    }
    Ok(())
}
