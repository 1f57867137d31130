//! Distil a small MLP into a depth-3 decision tree and report holdout fidelity.

use posthoc::fixtures;
use posthoc::surrogate::{global_tree_surrogate, RegionSampling, TreeSurrogateConfig};

fn main() -> posthoc::Result<()> {
    let model = posthoc::load_model(fixtures::TANH_MLP)?;
    let region = RegionSampling::from_schema(model.schema())?;
    for depth in 1..=4 {
        let t = global_tree_surrogate(&model, &region, &TreeSurrogateConfig::new(depth, 2000, 3))?;
        println!("depth {depth}: fidelity {:.3} on {} holdout points", t.fidelity, t.n_holdout);
    }
    Ok(())
}
