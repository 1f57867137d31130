//! Explain a loan decision by the most similar past applicants.

use posthoc::surrogate::{case_based, CaseMetric};
use posthoc::{fixtures, DataPoint, Dataset};

fn main() -> posthoc::Result<()> {
    let model = posthoc::load_model(fixtures::LOAN)?;
    let data = Dataset::from_csv(model.schema().clone(), fixtures::LOAN_DATA.as_bytes())?;
    let x = DataPoint::new(vec![35.0, 25.0]);
    println!("applicant score {:.2}", model.score(&x)?.score);
    for metric in [CaseMetric::InputMad, CaseMetric::ScoreSpace, CaseMetric::Blended { alpha: 0.5 }] {
        let cb = case_based(&model, &data, &x, 3, metric)?;
        println!("{metric:?}");
        for n in &cb.neighbors {
            println!("  row {:>2} {:?} score {:.2} distance {:.3}", n.row, n.point.values(), n.score, n.distance);
        }
    }
    Ok(())
}
