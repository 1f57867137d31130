//! Exhaustive grid search, used to check the optimiser.

use super::{CounterfactualResult, DistanceConfig, Goal, TargetSpec};
use crate::error::{Error, Result};
use crate::model::{argmax, Model};
use crate::schema::DataPoint;

/// Largest cartesian grid the oracle will enumerate.
pub const MAX_GRID_POINTS: usize = 10_000_000;

/// Scores every point of the cartesian product of `grid` (one value list per
/// feature) and returns the feasible point nearest to `x`. Ties go to the
/// lexicographically smallest point. Locked features are held at `x`;
/// values outside the schema are dropped. With no feasible point the result
/// is the point with the smallest residual, marked not converged.
pub fn oracle_grid_search(
    model: &Model,
    x: &DataPoint,
    target: &TargetSpec,
    distance: &DistanceConfig,
    grid: &[Vec<f64>],
) -> Result<CounterfactualResult> {
    let schema = model.schema();
    schema.validate(x)?;
    schema.check_dim(grid.len(), "grid")?;
    let goal = target.resolve(model)?;

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    for (k, values) in grid.iter().enumerate() {
        let axis = if distance.is_locked(k) {
            vec![x[k]]
        } else {
            let f = schema.feature(k);
            let mut v: Vec<f64> = values.iter().copied().filter(|&v| f.check_value(v).is_ok()).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        if axis.is_empty() {
            return Err(Error::config(format!(
                "grid for '{}' has no valid values",
                schema.feature(k).name
            )));
        }
        axes.push(axis);
    }
    let size = axes
        .iter()
        .try_fold(1usize, |acc, a| acc.checked_mul(a.len()).filter(|&s| s <= MAX_GRID_POINTS))
        .ok_or_else(|| Error::config(format!("grid exceeds {MAX_GRID_POINTS} points")))?;

    let d = axes.len();
    let mut idx = vec![0usize; d];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best_feasible: Option<(Vec<f64>, f64)> = None;
    let mut best_infeasible: Option<(Vec<f64>, f64)> = None;
    for _ in 0..size {
        let raw = model.raw(&point)?;
        if goal.feasible(&raw) {
            let dist = distance.distance(schema, &point, x.values());
            if best_feasible.as_ref().is_none_or(|(_, b)| dist < *b) {
                best_feasible = Some((point.clone(), dist));
            }
        } else if best_feasible.is_none() {
            let r = goal.residual(&raw).abs();
            if best_infeasible.as_ref().is_none_or(|(_, b)| r < *b) {
                best_infeasible = Some((point.clone(), r));
            }
        }
        // odometer with the last feature fastest, so visiting order is lexicographic
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                point[k] = axes[k][idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = axes[k][0];
        }
    }

    let (c, converged) = match (best_feasible, best_infeasible) {
        (Some((c, _)), _) => (c, true),
        (None, Some((c, _))) => (c, false),
        (None, None) => unreachable!("grid is non-empty"),
    };
    let raw_c = model.raw(&c)?;
    let raw_x = model.raw(x.values())?;
    let label = |raw: &[f64]| match goal {
        Goal::Class { .. } => Some(model.classes()[argmax(raw)].clone()),
        Goal::Score { .. } => None,
    };
    Ok(CounterfactualResult {
        score_at_c: goal.value(&raw_c),
        score_at_x: goal.value(&raw_x),
        class_at_c: label(&raw_c),
        class_at_x: label(&raw_x),
        distance: distance.distance(schema, &c, x.values()),
        c: DataPoint::new(c),
        converged,
        lambda_trace: Vec::new(),
        n_model_evals: size + 2,
        seed: 0,
    })
}
