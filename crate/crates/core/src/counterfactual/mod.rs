//! Nearest-input search for a target score or class.
//!
//! The search minimises `λ·r(c)² + d(c, x)` where `r` is the residual to the
//! target, growing λ geometrically and warm-starting each inner solve from
//! the previous iterate until the residual falls within tolerance.

mod contrast;
mod optimize;
mod oracle;

pub use contrast::{render_contrast, ContrastStatement, FeatureChange};
pub use oracle::{oracle_grid_search, MAX_GRID_POINTS};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{argmax, Model, OutputKind};
use crate::schema::{DataPoint, FeatureKind, Schema};
use optimize::{coordinate_descent, fd_gradient_descent, nelder_mead, Space};

/// Default tolerance on the target residual.
pub const DEFAULT_TOLERANCE: f64 = 0.01;

/// Desired outcome: a score value `target` or a class label `target_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_class: Option<String>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl TargetSpec {
    pub fn score(target: f64, tolerance: f64) -> Self {
        TargetSpec {
            target: Some(target),
            target_class: None,
            tolerance,
        }
    }

    pub fn class(label: impl Into<String>, tolerance: f64) -> Self {
        TargetSpec {
            target: None,
            target_class: Some(label.into()),
            tolerance,
        }
    }

    pub(crate) fn resolve(&self, model: &Model) -> Result<Goal> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::config("tolerance must be a positive number"));
        }
        match (&self.target, &self.target_class, model.output_kind()) {
            (Some(_), Some(_), _) | (None, None, _) => {
                Err(Error::config("set exactly one of target and target_class"))
            }
            (Some(t), None, OutputKind::Score) => {
                if !t.is_finite() {
                    return Err(Error::config("target must be finite"));
                }
                Ok(Goal::Score {
                    target: *t,
                    tolerance: self.tolerance,
                })
            }
            (Some(_), None, OutputKind::ClassProbabilities) => Err(Error::config(
                "the model outputs class probabilities; use target_class",
            )),
            (None, Some(_), OutputKind::Score) => {
                Err(Error::config("the model outputs a score; use target"))
            }
            (None, Some(label), OutputKind::ClassProbabilities) => {
                let class = model
                    .class_index(label)
                    .ok_or_else(|| Error::config(format!("unknown class '{label}'")))?;
                if self.tolerance >= 0.5 {
                    return Err(Error::config("class targets need tolerance < 0.5"));
                }
                Ok(Goal::Class {
                    class,
                    threshold: 0.5 + self.tolerance,
                })
            }
        }
    }
}

/// A resolved target.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Goal {
    Score { target: f64, tolerance: f64 },
    /// Probability of `class` pushed towards `threshold`; feasible once the
    /// class is the argmax with probability at least one half.
    Class { class: usize, threshold: f64 },
}

impl Goal {
    /// The scalar the search steers: the score, or the target-class probability.
    pub fn value(&self, raw: &[f64]) -> f64 {
        match self {
            Goal::Score { .. } => raw[0],
            Goal::Class { class, .. } => raw[*class],
        }
    }

    pub fn residual(&self, raw: &[f64]) -> f64 {
        match *self {
            Goal::Score { target, .. } => raw[0] - target,
            Goal::Class { class, threshold } => (threshold - raw[class]).max(0.0),
        }
    }

    pub fn feasible(&self, raw: &[f64]) -> bool {
        match *self {
            Goal::Score { target, tolerance } => (raw[0] - target).abs() <= tolerance,
            Goal::Class { class, .. } => raw[class] >= 0.5 && argmax(raw) == class,
        }
    }
}

/// Family of the distance `d(c, x)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceKind {
    /// `Σ |c_k − x_k| / MAD_k`.
    #[default]
    MadWeightedL1,
    /// `sqrt(Σ (c_k − x_k)²)`.
    L2,
    /// `Σ w_k |c_k − x_k|` with caller weights.
    CustomWeights { weights: Vec<f64> },
}

impl DistanceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DistanceKind::MadWeightedL1 => "mad_weighted_l1",
            DistanceKind::L2 => "l2",
            DistanceKind::CustomWeights { .. } => "custom_weights",
        }
    }
}

/// A resolved distance with per-feature weights and locked features.
/// Categorical features contribute `w_k` on any category change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceConfig {
    pub kind: DistanceKind,
    pub weights: Vec<f64>,
    pub locked: Vec<usize>,
}

impl DistanceConfig {
    /// Resolves weights. `scales` are per-feature MADs (from a dataset);
    /// without them the MAD-weighted distance uses unit weights.
    pub fn new(schema: &Schema, kind: DistanceKind, scales: Option<&[f64]>, locked: Vec<usize>) -> Result<Self> {
        let d = schema.dim();
        let weights = match &kind {
            DistanceKind::MadWeightedL1 => match scales {
                Some(s) => {
                    schema.check_dim(s.len(), "MAD scales")?;
                    schema
                        .features()
                        .iter()
                        .zip(s)
                        .map(|(f, &m)| if f.kind == FeatureKind::Categorical { 1.0 } else { 1.0 / m })
                        .collect()
                }
                None => vec![1.0; d],
            },
            DistanceKind::L2 => vec![1.0; d],
            DistanceKind::CustomWeights { weights } => {
                schema.check_dim(weights.len(), "distance weights")?;
                weights.clone()
            }
        };
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::config(format!("distance weights must be finite and > 0 (got {w})")));
        }
        let mut locked = locked;
        locked.sort_unstable();
        locked.dedup();
        if let Some(&k) = locked.iter().find(|&&k| k >= d) {
            return Err(Error::config(format!("locked feature index {k} out of range")));
        }
        Ok(DistanceConfig { kind, weights, locked })
    }

    /// Same as [`DistanceConfig::new`] with locked features given by name.
    pub fn with_locked_names(
        schema: &Schema,
        kind: DistanceKind,
        scales: Option<&[f64]>,
        locked: &[String],
    ) -> Result<Self> {
        let idx = locked
            .iter()
            .map(|name| {
                schema
                    .index_of(name)
                    .ok_or_else(|| Error::config(format!("unknown locked feature '{name}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, kind, scales, idx)
    }

    pub fn is_locked(&self, k: usize) -> bool {
        self.locked.binary_search(&k).is_ok()
    }

    pub fn distance(&self, schema: &Schema, c: &[f64], x: &[f64]) -> f64 {
        let terms = schema.features().iter().zip(c.iter().zip(x)).zip(&self.weights);
        match self.kind {
            DistanceKind::L2 => terms
                .map(|((f, (a, b)), w)| {
                    if f.kind == FeatureKind::Categorical {
                        if a != b { *w } else { 0.0 }
                    } else {
                        w * (a - b) * (a - b)
                    }
                })
                .sum::<f64>()
                .sqrt(),
            _ => terms
                .map(|((f, (a, b)), w)| {
                    if f.kind == FeatureKind::Categorical {
                        if a != b { *w } else { 0.0 }
                    } else {
                        w * (a - b).abs()
                    }
                })
                .sum(),
        }
    }

    pub(crate) fn echo(&self, schema: &Schema) -> Value {
        json!({
            "kind": self.kind.name(),
            "weights": self.weights,
            "locked": self.locked.iter().map(|&k| schema.feature(k).name.clone()).collect::<Vec<_>>(),
        })
    }
}

/// Inner minimiser used at each λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerOptimizer {
    NelderMead,
    CoordinateDescent,
    FdGradientDescent { step: f64 },
}

impl InnerOptimizer {
    pub fn name(&self) -> &'static str {
        match self {
            InnerOptimizer::NelderMead => "nelder_mead",
            InnerOptimizer::CoordinateDescent => "coordinate_descent",
            InnerOptimizer::FdGradientDescent { .. } => "fd_gradient_descent",
        }
    }
}

/// Most free continuous features Nelder–Mead is chosen for automatically.
pub const NELDER_MEAD_MAX_DIM: usize = 10;

/// Penalty schedule and inner-solver budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub lambda_init: f64,
    pub lambda_growth: f64,
    pub max_outer: usize,
    /// `None` picks Nelder–Mead for up to ten free continuous features and
    /// coordinate descent otherwise.
    pub inner_optimizer: Option<InnerOptimizer>,
    pub max_inner_evals: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            lambda_init: 0.1,
            lambda_growth: 10.0,
            max_outer: 10,
            inner_optimizer: None,
            max_inner_evals: 2000,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_init.is_finite() && self.lambda_init > 0.0) {
            return Err(Error::config("lambda_init must be > 0"));
        }
        if !(self.lambda_growth.is_finite() && self.lambda_growth > 1.0) {
            return Err(Error::config("lambda_growth must be > 1"));
        }
        if self.max_outer == 0 || self.max_inner_evals == 0 || self.restarts == 0 {
            return Err(Error::config("max_outer, max_inner_evals and restarts must be positive"));
        }
        if let Some(InnerOptimizer::FdGradientDescent { step }) = self.inner_optimizer {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::config("fd_gradient_descent step must be > 0"));
            }
        }
        Ok(())
    }

    /// Upper bound on inner objective evaluations.
    pub fn total_budget(&self) -> usize {
        self.restarts * self.max_outer * self.max_inner_evals
    }
}

/// One outer iteration: the penalty weight and the objective of the
/// accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaStep {
    pub lambda: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualResult {
    pub c: DataPoint,
    /// Score at `c` (target-class probability for class targets).
    pub score_at_c: f64,
    pub score_at_x: f64,
    /// Predicted labels at `c` and `x` for classifiers.
    pub class_at_c: Option<String>,
    pub class_at_x: Option<String>,
    pub distance: f64,
    pub converged: bool,
    pub lambda_trace: Vec<LambdaStep>,
    pub n_model_evals: usize,
    pub seed: u64,
}

/// Finds a nearby input whose output meets `target`.
///
/// Returns `converged = false` rather than an error when the budget runs out.
pub fn find_counterfactual(
    model: &Model,
    x: &DataPoint,
    target: &TargetSpec,
    distance: &DistanceConfig,
    search: &SearchConfig,
) -> Result<CounterfactualResult> {
    Search::new(model, x, target, distance, search)?.run(&[])
}

/// Several counterfactuals for the same request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiverseCounterfactuals {
    /// Converged, pairwise distinct results sorted by distance.
    pub results: Vec<CounterfactualResult>,
    pub requested: usize,
    /// Set when fewer than `requested` distinct results were found.
    pub shortfall: bool,
    /// Repulsion `ρ / (δ + d(c, c*))` applied around earlier solutions.
    pub rho: f64,
    pub delta: f64,
}

/// Bisection steps when pulling a feasible point back toward `x`.
const PULL_BACK_STEPS: usize = 40;

/// Offset in the repulsion denominator.
pub const REPULSION_DELTA: f64 = 1e-3;

/// Runs `n` searches (seeds `seed + i`), each repelled from earlier
/// solutions by `ρ / (δ + d(c, c*))` with `ρ = 0.1·d(best, x)`.
pub fn diverse_counterfactuals(
    model: &Model,
    x: &DataPoint,
    target: &TargetSpec,
    distance: &DistanceConfig,
    search: &SearchConfig,
    n: usize,
) -> Result<DiverseCounterfactuals> {
    if n == 0 {
        return Err(Error::config("n must be at least 1"));
    }
    let mut found: Vec<CounterfactualResult> = Vec::new();
    let mut rho = 0.0;
    for i in 0..n {
        let cfg = search.clone().with_seed(search.seed.wrapping_add(i as u64));
        let searcher = Search::new(model, x, target, distance, &cfg)?;
        let best = found.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
        rho = if best.is_finite() { 0.1 * best } else { 0.0 };
        let repel: Vec<(&[f64], f64)> = found.iter().map(|r| (r.c.values(), rho)).collect();
        let result = searcher.run(&repel)?;
        if !result.converged {
            continue;
        }
        let eps_dup = found
            .first()
            .map(|f| (0.01 * f.distance).max(1e-9))
            .unwrap_or(1e-9);
        let duplicate = found
            .iter()
            .any(|r| distance.distance(model.schema(), r.c.values(), result.c.values()) < eps_dup);
        if !duplicate {
            found.push(result);
        }
    }
    found.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(DiverseCounterfactuals {
        shortfall: found.len() < n,
        results: found,
        requested: n,
        rho,
        delta: REPULSION_DELTA,
    })
}

struct Search<'a> {
    model: &'a Model,
    x: &'a DataPoint,
    goal: Goal,
    distance: &'a DistanceConfig,
    config: &'a SearchConfig,
    free: Vec<usize>,
    space: Space,
    optimizer: InnerOptimizer,
}

/// Squared residual, distance (with repulsion) and feasibility at a point.
type Terms<'a> = dyn Fn(&[f64]) -> Result<(f64, f64, bool)> + 'a;

/// Iterate of one restart.
struct Iterate {
    free: Vec<f64>,
    violation: f64,
    feasible: bool,
    objective: f64,
    trace: Vec<LambdaStep>,
}

impl<'a> Search<'a> {
    fn new(
        model: &'a Model,
        x: &'a DataPoint,
        target: &TargetSpec,
        distance: &'a DistanceConfig,
        config: &'a SearchConfig,
    ) -> Result<Self> {
        config.validate()?;
        let schema = model.schema();
        schema.validate(x)?;
        schema.check_dim(distance.weights.len(), "distance weights")?;
        let goal = target.resolve(model)?;
        let free: Vec<usize> = (0..schema.dim()).filter(|&k| !distance.is_locked(k)).collect();
        let space = Space {
            lo: free.iter().map(|&k| schema.feature(k).min_value()).collect(),
            hi: free.iter().map(|&k| schema.feature(k).max_value()).collect(),
            discrete: free.iter().map(|&k| schema.feature(k).is_discrete()).collect(),
            scale: free.iter().map(|&k| 1.0 / distance.weights[k]).collect(),
        };
        let optimizer = config.inner_optimizer.unwrap_or_else(|| {
            if free.len() <= NELDER_MEAD_MAX_DIM && space.discrete.iter().all(|d| !d) {
                InnerOptimizer::NelderMead
            } else {
                InnerOptimizer::CoordinateDescent
            }
        });
        Ok(Search {
            model,
            x,
            goal,
            distance,
            config,
            free,
            space,
            optimizer,
        })
    }

    fn full_point(&self, free: &[f64]) -> Vec<f64> {
        let mut p = self.x.values().to_vec();
        for (&k, &v) in self.free.iter().zip(free) {
            p[k] = v;
        }
        p
    }

    fn run(&self, repel: &[(&[f64], f64)]) -> Result<CounterfactualResult> {
        let schema = self.model.schema();
        let x = self.x.values();
        let mut evals = 0usize;
        let mut best: Option<(Iterate, f64)> = None;

        for restart in 0..self.config.restarts {
            let mut start: Vec<f64> = self.free.iter().map(|&k| x[k]).collect();
            if restart > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(restart as u64));
                for (v, s) in start.iter_mut().zip(&self.space.scale) {
                    *v += rng.gen_range(-1.0..=1.0) * s;
                }
                self.space.project(&mut start);
            }
            let it = self.restart(start, repel, &mut evals)?;
            let dist = self.distance.distance(schema, &self.full_point(&it.free), x);
            let better = match &best {
                None => true,
                Some((b, bd)) => match (it.feasible, b.feasible) {
                    (true, false) => true,
                    (false, true) => false,
                    (true, true) => dist < *bd,
                    (false, false) => it.objective < b.objective,
                },
            };
            if better {
                best = Some((it, dist));
            }
        }

        let (it, dist) = best.expect("restarts > 0");
        let c = self.full_point(&it.free);
        let raw_c = self.model.raw(&c)?;
        let raw_x = self.model.raw(x)?;
        evals += 2;
        let label = |raw: &[f64]| match self.goal {
            Goal::Class { .. } => Some(self.model.classes()[argmax(raw)].clone()),
            Goal::Score { .. } => None,
        };
        Ok(CounterfactualResult {
            score_at_c: self.goal.value(&raw_c),
            score_at_x: self.goal.value(&raw_x),
            class_at_c: label(&raw_c),
            class_at_x: label(&raw_x),
            converged: self.goal.feasible(&raw_c),
            c: DataPoint::new(c),
            distance: dist,
            lambda_trace: it.trace,
            n_model_evals: evals,
            seed: self.config.seed,
        })
    }

    fn restart(&self, start: Vec<f64>, repel: &[(&[f64], f64)], evals: &mut usize) -> Result<Iterate> {
        let schema = self.model.schema();
        let x = self.x.values();
        let terms = |free: &[f64]| -> Result<(f64, f64, bool)> {
            let p = self.full_point(free);
            let raw = self.model.raw(&p)?;
            let r = self.goal.residual(&raw);
            let mut d = self.distance.distance(schema, &p, x);
            for (other, rho) in repel {
                d += rho / (REPULSION_DELTA + self.distance.distance(schema, &p, other));
            }
            Ok((r * r, d, self.goal.feasible(&raw)))
        };

        let (v0, d0, f0) = terms(&start)?;
        *evals += 1;
        let mut current = Iterate {
            free: start,
            violation: v0,
            feasible: f0,
            objective: self.config.lambda_init * v0 + d0,
            trace: Vec::new(),
        };
        let mut lambda = self.config.lambda_init;
        for _ in 0..self.config.max_outer {
            let mut objective = |free: &[f64]| -> Result<f64> {
                let (v, d, _) = terms(free)?;
                Ok(lambda * v + d)
            };
            let budget = self.config.max_inner_evals;
            let out = match self.optimizer {
                InnerOptimizer::NelderMead => nelder_mead(&mut objective, &self.space, &current.free, budget)?,
                InnerOptimizer::CoordinateDescent => {
                    coordinate_descent(&mut objective, &self.space, &current.free, budget)?
                }
                InnerOptimizer::FdGradientDescent { step } => {
                    fd_gradient_descent(&mut objective, &self.space, &current.free, budget, step)?
                }
            };
            *evals += out.evals;
            let (v, _, feasible) = terms(&out.point)?;
            *evals += 1;
            if v <= current.violation || feasible {
                current.free = out.point;
                current.violation = v;
                current.feasible = feasible;
                current.objective = out.value;
            } else {
                let (cv, cd, _) = terms(&current.free)?;
                *evals += 1;
                current.objective = lambda * cv + cd;
            }
            current.trace.push(LambdaStep {
                lambda,
                objective: current.objective,
            });
            if current.feasible {
                break;
            }
            lambda *= self.config.lambda_growth;
        }
        if current.feasible {
            self.pull_back(&mut current, &terms, evals)?;
        }
        Ok(current)
    }

    /// The penalty leaves a feasible iterate inside the tolerance band
    /// rather than on its edge. Bisect the segment from `x` to the iterate
    /// for the feasible point closest to `x`; keep it only if the distance
    /// (with any repulsion) does not grow.
    fn pull_back(
        &self,
        current: &mut Iterate,
        terms: &Terms<'_>,
        evals: &mut usize,
    ) -> Result<()> {
        let x = self.x.values();
        let origin: Vec<f64> = self.free.iter().map(|&k| x[k]).collect();
        let at = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = origin.iter().zip(&current.free).map(|(a, c)| a + t * (c - a)).collect();
            self.space.project(&mut p);
            p
        };
        let (_, d_current, _) = terms(&current.free)?;
        *evals += 1;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best: Option<(Vec<f64>, f64, f64)> = None;
        for _ in 0..PULL_BACK_STEPS {
            let mid = 0.5 * (lo + hi);
            let p = at(mid);
            let (v, d, feasible) = terms(&p)?;
            *evals += 1;
            if feasible {
                hi = mid;
                best = Some((p, v, d));
            } else {
                lo = mid;
            }
        }
        if let Some((p, v, d)) = best {
            if d <= d_current {
                current.objective += d - d_current;
                current.free = p;
                current.violation = v;
            }
        }
        Ok(())
    }
}

/// The counterfactual output document.
pub fn counterfactual_document(
    schema: &Schema,
    result: &CounterfactualResult,
    statement: &ContrastStatement,
    target: &TargetSpec,
    distance: &DistanceConfig,
    search: &SearchConfig,
) -> Value {
    json!({
        "counterfactual": schema.point_to_json(&result.c),
        "score": result.score_at_c,
        "distance": result.distance,
        "converged": result.converged,
        "lambda_trace": result.lambda_trace,
        "changed_features": statement.changed_features,
        "statement": statement.text,
        "config_echo": {
            "target": target,
            "distance": distance.echo(schema),
            "search": search,
            "n_model_evals": result.n_model_evals,
        },
        "seed": result.seed,
    })
}
