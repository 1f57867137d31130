//! Counterfactual search: the bee that would have been a fly, and the two
//! ways to cross a two-sided rule.

use posthoc::counterfactual::{
    diverse_counterfactuals, find_counterfactual, render_contrast, DistanceConfig, DistanceKind, SearchConfig,
    TargetSpec,
};
use posthoc::{fixtures, DataPoint};

fn main() -> posthoc::Result<()> {
    let bee = posthoc::load_model(fixtures::BEE)?;
    let x = DataPoint::new(vec![6.0, 4.0]);
    let distance = DistanceConfig::with_locked_names(bee.schema(), DistanceKind::MadWeightedL1, None, &["legs".into()])?;
    let search = SearchConfig::default().with_seed(7);
    let r = find_counterfactual(&bee, &x, &TargetSpec::class("fly", 0.01), &distance, &search)?;
    println!("{}", render_contrast(&x, &r, bee.schema()).text);

    let rule = posthoc::load_model(fixtures::TWO_SIDED)?;
    let x = DataPoint::new(vec![0.0, 0.0]);
    let distance = DistanceConfig::new(rule.schema(), DistanceKind::L2, None, vec![])?;
    let set = diverse_counterfactuals(&rule, &x, &TargetSpec::score(1.0, 0.01), &distance, &search, 2)?;
    for r in &set.results {
        println!("{}", render_contrast(&x, r, rule.schema()).text);
    }
    if set.shortfall {
        println!("only {} of {} found", set.results.len(), set.requested);
    }
    Ok(())
}
