//! Score the bee/fly/spider classifier at a few points.

use posthoc::fixtures;

fn main() -> posthoc::Result<()> {
    let model = posthoc::load_model(fixtures::BEE)?;
    for (legs, wings) in [(6.0, 4.0), (6.0, 2.0), (8.0, 0.0)] {
        let x = posthoc::DataPoint::new(vec![legs, wings]);
        let out = model.score(&x)?;
        println!(
            "legs={legs} wings={wings} -> {} (p = {:.2})",
            out.predicted_class.as_deref().unwrap_or("?"),
            out.score
        );
    }
    Ok(())
}
