//! The same boolean model explained by four schemes. On z1 OR (z2 AND z3)
//! Banzhaf gives z1 0.75 while Shapley gives 2/3.

use posthoc::fidelity::{compare_schemes, SchemeCombo};
use posthoc::surrogate::{explain, AttributionOptions, AttributionScheme, BaselineConfig, BaselineStrategy};
use posthoc::{fixtures, DataPoint};

fn main() -> posthoc::Result<()> {
    let model = posthoc::load_model(fixtures::OR_AND3)?;
    let x = DataPoint::new(vec![1.0, 1.0, 1.0]);
    let zero = BaselineConfig::resolve(model.schema(), BaselineStrategy::Zero, None)?;
    let opts = AttributionOptions::default();

    let schemes = [
        AttributionScheme::EdgeFromData,
        AttributionScheme::ShapleyExact,
        AttributionScheme::BanzhafExact,
        AttributionScheme::LimeKernel { n_samples: 8, kernel_width: None, seed: 0 },
    ];
    for scheme in &schemes {
        let e = explain(&model, &x, scheme, Some(&zero), &opts)?;
        let w: Vec<String> = e.weights.iter().map(|w| format!("{w:.4}")).collect();
        println!("{:<16} [{}]", scheme.name(), w.join(", "));
    }

    let combos: Vec<SchemeCombo> = schemes.iter().map(|s| SchemeCombo::new(s.clone(), Some(zero.clone()))).collect();
    let m = compare_schemes(&model, &x, &combos, &opts)?;
    println!("\npairwise normalized L1 divergence");
    for (label, row) in m.labels.iter().zip(&m.divergence) {
        let cells: Vec<String> = row.iter().map(|d| d.map_or("-".into(), |v| format!("{v:.3}"))).collect();
        println!("{label:<24} {}", cells.join("  "));
    }
    Ok(())
}
