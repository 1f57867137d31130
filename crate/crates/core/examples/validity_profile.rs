//! How far does a tangent-plane explanation stay faithful? The kink model
//! is linear within MAD-radius 2 of the origin and bends outside it.

use posthoc::fidelity::{classify_analogies, validity_profile, AnalogyConfig, RegionSpec};
use posthoc::surrogate::{explain, AttributionOptions, AttributionScheme};
use posthoc::{fixtures, DataPoint, Dataset};

fn main() -> posthoc::Result<()> {
    let model = posthoc::load_model(fixtures::KINK)?;
    let data = Dataset::from_csv(model.schema().clone(), fixtures::KINK_DATA.as_bytes())?;
    let scale = data.scales();
    let x = DataPoint::new(vec![0.0; 8]);
    let e = explain(&model, &x, &AttributionScheme::Gradient { step: None }, None, &AttributionOptions::default())?;

    let radii: Vec<f64> = (1..=12).map(|i| 0.25 * i as f64).collect();
    let profile = validity_profile(&model, &e, &scale, &radii, 0.95, 1000, 1)?;
    for (r, a) in profile.radii.iter().zip(&profile.agreement) {
        println!("radius {r:>4.2}  agreement {a:.3}");
    }
    match profile.validity_radius {
        Some(r) => println!("valid up to radius {r}"),
        None => println!("not valid even at the smallest radius"),
    }

    let report = classify_analogies(&model, &e, &RegionSpec::new(x, 3.0, 1000, 1, scale), &AnalogyConfig::default())?;
    for f in &report.features {
        println!("{}: {:?} (r = {:.2})", f.name, f.classification, f.effect_correlation);
    }
    Ok(())
}
