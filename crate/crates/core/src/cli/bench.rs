//! Scheme x baseline sweep over the fixture suite.

use crate::error::Result;
use crate::fidelity::{normalized_l1, validity_profile};
use crate::fixtures::OwnedFixture;
use crate::schema::DataPoint;
use crate::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy};

pub const BENCH_HEADER: &str = "fixture,scheme,baseline,argmax_feature,divergence_vs_shapley,validity_radius";

/// Radii (MAD units) probed for the validity radius column.
pub const BENCH_RADII: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

const BENCH_THRESHOLD: f64 = 0.95;

/// Central-difference step for models without an analytic gradient.
const FD_STEP: f64 = 1e-3;

/// Runs every fixture through the gradient, edge, exact Shapley, exact
/// Banzhaf and kernel-LIME surrogates under each applicable baseline.
///
/// Divergence is the normalized L1 distance to exact Shapley at the same
/// baseline. The gradient row has no baseline, so its weights are first
/// scaled by `x - b` against the first baseline of the fixture.
pub fn bench_csv(fixtures: &[OwnedFixture], seed: u64, samples: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER.split(',')).expect("in-memory csv");
    for fixture in fixtures {
        for row in fixture_rows(fixture, seed, samples)? {
            w.write_record(&row).expect("in-memory csv");
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8"))
}

fn fixture_rows(fixture: &OwnedFixture, seed: u64, samples: usize) -> Result<Vec<[String; 6]>> {
    let model = fixture.load_model()?;
    let dataset = fixture.load_dataset(&model)?;
    let schema = model.schema();
    let x = DataPoint::new(fixture.base.anchor.to_vec());
    schema.validate(&x)?;
    let scales = match &dataset {
        Some(d) => d.scales(),
        None => vec![1.0; model.dim()],
    };
    let opts = AttributionOptions::default();

    let mut baselines: Vec<(&str, BaselineConfig)> = Vec::new();
    if let Ok(b) = BaselineConfig::resolve(schema, BaselineStrategy::Zero, None) {
        baselines.push(("zero", b));
    }
    if let Some(r) = fixture.base.reference {
        let values = DataPoint::new(r.to_vec());
        baselines.push(("reference", BaselineConfig::resolve(schema, BaselineStrategy::Reference { values }, None)?));
    }
    if let Some(d) = &dataset {
        baselines.push(("dataset_median", BaselineConfig::resolve(schema, BaselineStrategy::DatasetMedian, Some(d))?));
        baselines.push(("dataset_mean", BaselineConfig::resolve(schema, BaselineStrategy::DatasetMean, Some(d))?));
    }

    let radius = |e: &crate::surrogate::SurrogateExplanation| -> Result<String> {
        let p = validity_profile(&model, e, &scales, &BENCH_RADII, BENCH_THRESHOLD, samples, seed)?;
        Ok(p.validity_radius.map(|r| format!("{r}")).unwrap_or_default())
    };
    let argmax = |e: &crate::surrogate::SurrogateExplanation| -> String {
        schema.feature(e.argmax_feature()).name.clone()
    };

    let mut rows = Vec::new();
    let step = if model.supports_analytic_gradient() { None } else { Some(FD_STEP) };
    let gradient = explain(&model, &x, &AttributionScheme::Gradient { step }, None, &opts)?;
    let gradient_divergence = match baselines.first() {
        Some((_, b)) => {
            let shapley = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(b), &opts)?;
            let scaled: Vec<f64> = gradient
                .weights
                .iter()
                .zip(x.values().iter().zip(b.resolved.values()))
                .map(|(g, (xi, bi))| g * (xi - bi))
                .collect();
            format!("{:.6}", normalized_l1(&scaled, &shapley.weights))
        }
        None => String::new(),
    };
    rows.push([
        fixture.base.name.to_string(),
        gradient.scheme.name().to_string(),
        "none".to_string(),
        argmax(&gradient),
        gradient_divergence,
        radius(&gradient)?,
    ]);

    let schemes = [
        AttributionScheme::EdgeFromData,
        AttributionScheme::ShapleyExact,
        AttributionScheme::BanzhafExact,
        AttributionScheme::LimeKernel {
            n_samples: samples,
            kernel_width: None,
            seed,
        },
    ];
    for (label, b) in &baselines {
        let shapley = explain(&model, &x, &AttributionScheme::ShapleyExact, Some(b), &opts)?;
        for scheme in &schemes {
            let e = explain(&model, &x, scheme, Some(b), &opts)?;
            rows.push([
                fixture.base.name.to_string(),
                scheme.name().to_string(),
                label.to_string(),
                argmax(&e),
                format!("{:.6}", normalized_l1(&e.weights, &shapley.weights)),
                radius(&e)?,
            ]);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{find, BENCH};

    #[test]
    fn linear_rows_agree_with_shapley() {
        let f = OwnedFixture::embedded(*find("linear").unwrap());
        let csv = bench_csv(&[f], 7, 200).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(BENCH_HEADER));
        let mut n = 0;
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols[0], "linear");
            let d: f64 = cols[4].parse().unwrap();
            assert!(d <= 1e-6, "{line}");
            n += 1;
        }
        // gradient plus four schemes for each of the zero and reference baselines
        assert_eq!(n, 9);
    }

    #[test]
    fn every_fixture_produces_rows() {
        let suite: Vec<_> = BENCH.iter().map(|f| OwnedFixture::embedded(*f)).collect();
        let csv = bench_csv(&suite, 1, 100).unwrap();
        for f in BENCH {
            assert!(csv.lines().any(|l| l.starts_with(&format!("{},", f.name))), "{}", f.name);
        }
    }
}
