use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::wls::weighted_least_squares;
use super::{
    materialize, AttributionOptions, AttributionScheme, BaselineConfig, BinaryPattern, Diagnostics,
    SurrogateExplanation,
};
use crate::error::{Error, Result};
use crate::model::{dot, GradientMethod, Model, OutputSelector};
use crate::schema::DataPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Exact,
    Sampled { n: usize, seed: u64 },
}

/// Scalar game over the vertices of the anchor/baseline cube.
struct Cube<'a> {
    model: &'a Model,
    x: &'a DataPoint,
    baseline: &'a DataPoint,
    output: OutputSelector,
    calls: usize,
    memo: HashMap<BinaryPattern, f64>,
}

impl<'a> Cube<'a> {
    fn new(model: &'a Model, x: &'a DataPoint, baseline: &'a BaselineConfig, opts: &AttributionOptions) -> Result<Self> {
        model.schema().validate(x)?;
        model.schema().validate(&baseline.resolved)?;
        let output = match opts.output {
            Some(o) => o,
            None => model.default_selector(x.values())?,
        };
        Ok(Self {
            model,
            x,
            baseline: &baseline.resolved,
            output,
            calls: 0,
            memo: HashMap::new(),
        })
    }

    fn d(&self) -> usize {
        self.x.len()
    }

    fn eval(&mut self, pattern: &BinaryPattern) -> Result<f64> {
        let p = materialize(pattern, self.x, self.baseline)?;
        self.calls += 1;
        self.model.scalar(p.values(), self.output)
    }

    fn eval_memo(&mut self, pattern: &BinaryPattern) -> Result<f64> {
        if let Some(v) = self.memo.get(pattern) {
            return Ok(*v);
        }
        let v = self.eval(pattern)?;
        self.memo.insert(pattern.clone(), v);
        Ok(v)
    }

    /// Every vertex, indexed by bit mask (bit k set keeps `x_k`).
    fn table(&mut self) -> Result<Vec<f64>> {
        let d = self.d();
        (0..1u64 << d)
            .map(|mask| self.eval(&BinaryPattern::from_mask(mask, d)))
            .collect()
    }

    fn finish(
        self,
        weights: Vec<f64>,
        intercept: f64,
        scheme: AttributionScheme,
        baseline: &BaselineConfig,
        r_squared: Option<f64>,
        regularized: bool,
    ) -> SurrogateExplanation {
        SurrogateExplanation {
            weights,
            intercept,
            scheme,
            baseline: Some(baseline.clone()),
            anchor: self.x.clone(),
            output: self.output,
            diagnostics: Diagnostics {
                r_squared,
                n_evaluations: self.calls,
                regularized,
            },
        }
    }
}

fn check_exact(d: usize, opts: &AttributionOptions) -> Result<()> {
    if d > opts.exact_limit || d >= 63 {
        return Err(Error::ExactLimitExceeded {
            dimension: d,
            limit: opts.exact_limit,
        });
    }
    Ok(())
}

/// Single-flip edges at the anchor: `w_k = f(x) − f(x with k switched off)`.
/// The intercept is `f(x) − Σ w_k`, so the surrogate reproduces `f(x)` at
/// the anchor. Uses exactly `d + 1` model calls.
pub fn edge_attribution(
    model: &Model,
    x: &DataPoint,
    baseline: &BaselineConfig,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    let mut cube = Cube::new(model, x, baseline, opts)?;
    let d = cube.d();
    let mut pattern = BinaryPattern::ones(d);
    let fx = cube.eval(&pattern)?;
    let mut weights = Vec::with_capacity(d);
    for k in 0..d {
        pattern.0[k] = false;
        weights.push(fx - cube.eval(&pattern)?);
        pattern.0[k] = true;
    }
    // anchored intercept keeps the budget at d + 1 calls; equals f(b) when d = 1
    let intercept = fx - weights.iter().sum::<f64>();
    Ok(cube.finish(weights, intercept, AttributionScheme::EdgeFromData, baseline, None, false))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Shapley values of the cube game `S ↦ f(materialize(S))`.
pub fn shapley_attribution(
    model: &Model,
    x: &DataPoint,
    baseline: &BaselineConfig,
    mode: SamplingMode,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    let mut cube = Cube::new(model, x, baseline, opts)?;
    let d = cube.d();
    match mode {
        SamplingMode::Exact => {
            check_exact(d, opts)?;
            let v = cube.table()?;
            // |S|!(d−|S|−1)!/d! = 1 / (d · C(d−1, |S|))
            let coef: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * binomial(d - 1, s))).collect();
            let weights = (0..d)
                .map(|k| {
                    let bit = 1u64 << k;
                    (0..1u64 << d)
                        .filter(|m| m & bit == 0)
                        .map(|m| coef[m.count_ones() as usize] * (v[(m | bit) as usize] - v[m as usize]))
                        .sum()
                })
                .collect();
            let intercept = v[0];
            Ok(cube.finish(weights, intercept, AttributionScheme::ShapleyExact, baseline, None, false))
        }
        SamplingMode::Sampled { n, seed } => {
            if n == 0 {
                return Err(Error::config("sampled schemes need n >= 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut phi = vec![0.0; d];
            let mut order: Vec<usize> = (0..d).collect();
            let mut walked = 0;
            // antithetic pairs: each drawn order is also walked reversed
            while walked < n {
                order.shuffle(&mut rng);
                walk_permutation(&mut cube, &order, &mut phi)?;
                walked += 1;
                if walked < n {
                    order.reverse();
                    walk_permutation(&mut cube, &order, &mut phi)?;
                    walked += 1;
                }
            }
            let weights = phi.into_iter().map(|p| p / walked as f64).collect();
            let intercept = cube.eval_memo(&BinaryPattern::zeros(d))?;
            Ok(cube.finish(
                weights,
                intercept,
                AttributionScheme::ShapleySampled {
                    n_permutations: n,
                    seed,
                },
                baseline,
                None,
                false,
            ))
        }
    }
}

fn walk_permutation(cube: &mut Cube<'_>, order: &[usize], phi: &mut [f64]) -> Result<()> {
    let mut pattern = BinaryPattern::zeros(order.len());
    let mut prev = cube.eval_memo(&pattern)?;
    for &k in order {
        pattern.0[k] = true;
        let next = cube.eval_memo(&pattern)?;
        phi[k] += next - prev;
        prev = next;
    }
    Ok(())
}

/// Unweighted mean over all cube edges in each feature's direction.
pub fn banzhaf_attribution(
    model: &Model,
    x: &DataPoint,
    baseline: &BaselineConfig,
    mode: SamplingMode,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    let mut cube = Cube::new(model, x, baseline, opts)?;
    let d = cube.d();
    match mode {
        SamplingMode::Exact => {
            check_exact(d, opts)?;
            let v = cube.table()?;
            let scale = 0.5f64.powi(d as i32 - 1);
            let weights = (0..d)
                .map(|k| {
                    let bit = 1u64 << k;
                    scale
                        * (0..1u64 << d)
                            .filter(|m| m & bit == 0)
                            .map(|m| v[(m | bit) as usize] - v[m as usize])
                            .sum::<f64>()
                })
                .collect();
            let intercept = v[0];
            Ok(cube.finish(weights, intercept, AttributionScheme::BanzhafExact, baseline, None, false))
        }
        SamplingMode::Sampled { n, seed } => {
            if n == 0 {
                return Err(Error::config("sampled schemes need n >= 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut phi = vec![0.0; d];
            for _ in 0..n {
                let mut pattern = BinaryPattern((0..d).map(|_| rng.gen::<bool>()).collect());
                for (k, acc) in phi.iter_mut().enumerate() {
                    let keep = pattern.0[k];
                    pattern.0[k] = true;
                    let on = cube.eval_memo(&pattern)?;
                    pattern.0[k] = false;
                    let off = cube.eval_memo(&pattern)?;
                    pattern.0[k] = keep;
                    *acc += on - off;
                }
            }
            let weights = phi.into_iter().map(|p| p / n as f64).collect();
            let intercept = cube.eval_memo(&BinaryPattern::zeros(d))?;
            Ok(cube.finish(
                weights,
                intercept,
                AttributionScheme::BanzhafSampled { n, seed },
                baseline,
                None,
                false,
            ))
        }
    }
}

/// Default LIME kernel width on the cube.
pub fn default_kernel_width(d: usize) -> f64 {
    (d as f64).sqrt() * 0.75
}

/// Kernel-weighted linear fit on cube vertices. Vertices are weighted by
/// `exp(−h²/σ²)` with `h` the Hamming distance to the anchor pattern.
/// When `n_samples ≥ 2^d` (and `d` is within the exact limit) the whole
/// cube is enumerated instead of sampled.
pub fn lime_fit(
    model: &Model,
    x: &DataPoint,
    baseline: &BaselineConfig,
    n_samples: usize,
    kernel_width: Option<f64>,
    seed: u64,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    let d = x.len();
    let sigma = kernel_width.unwrap_or_else(|| default_kernel_width(d));
    let scheme = AttributionScheme::LimeKernel {
        n_samples,
        kernel_width: Some(sigma),
        seed,
    };
    scheme.validate(d, opts.exact_limit)?;
    let mut cube = Cube::new(model, x, baseline, opts)?;

    let patterns: Vec<BinaryPattern> = if d <= opts.exact_limit && d < 63 && n_samples as u128 >= 1u128 << d {
        (0..1u64 << d).map(|m| BinaryPattern::from_mask(m, d)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_samples)
            .map(|_| BinaryPattern((0..d).map(|_| rng.gen::<bool>()).collect()))
            .collect()
    };
    let mut rows = Vec::with_capacity(patterns.len());
    let mut y = Vec::with_capacity(patterns.len());
    let mut w = Vec::with_capacity(patterns.len());
    for p in &patterns {
        y.push(cube.eval_memo(p)?);
        let h = p.zeros_count() as f64;
        w.push(if sigma.is_infinite() { 1.0 } else { (-(h * h) / (sigma * sigma)).exp() });
        rows.push(p.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect::<Vec<f64>>());
    }
    let fit = weighted_least_squares(&rows, &y, &w)?;
    Ok(cube.finish(
        fit.coefficients,
        fit.intercept,
        scheme,
        baseline,
        Some(fit.r_squared),
        fit.regularized,
    ))
}

/// Tangent-plane surrogate: weights are the gradient at `x`, intercept
/// makes the plane pass through `f(x)`.
pub fn gradient_attribution(
    model: &Model,
    x: &DataPoint,
    step: Option<f64>,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    model.schema().validate(x)?;
    let output = match opts.output {
        Some(o) => o,
        None => model.default_selector(x.values())?,
    };
    let method = match step {
        None => GradientMethod::Analytic,
        Some(h) => GradientMethod::central(h),
    };
    let weights = model.gradient(x.values(), &method, output)?;
    let fx = model.scalar(x.values(), output)?;
    let calls = match step {
        None => 1,
        Some(_) => 2 * x.len() + 1,
    };
    Ok(SurrogateExplanation {
        intercept: fx - dot(&weights, x.values()),
        weights,
        scheme: AttributionScheme::Gradient { step },
        baseline: None,
        anchor: x.clone(),
        output,
        diagnostics: Diagnostics {
            r_squared: None,
            n_evaluations: calls,
            regularized: false,
        },
    })
}

/// Runs any scheme. Baseline-free schemes ignore `baseline`.
pub fn explain(
    model: &Model,
    x: &DataPoint,
    scheme: &AttributionScheme,
    baseline: Option<&BaselineConfig>,
    opts: &AttributionOptions,
) -> Result<SurrogateExplanation> {
    scheme.validate(x.len(), opts.exact_limit)?;
    let need = || baseline.ok_or_else(|| Error::config(format!("scheme {} needs a baseline", scheme.name())));
    match scheme {
        AttributionScheme::Gradient { step } => gradient_attribution(model, x, *step, opts),
        AttributionScheme::EdgeFromData => edge_attribution(model, x, need()?, opts),
        AttributionScheme::ShapleyExact => shapley_attribution(model, x, need()?, SamplingMode::Exact, opts),
        AttributionScheme::ShapleySampled { n_permutations, seed } => shapley_attribution(
            model,
            x,
            need()?,
            SamplingMode::Sampled {
                n: *n_permutations,
                seed: *seed,
            },
            opts,
        ),
        AttributionScheme::BanzhafExact => banzhaf_attribution(model, x, need()?, SamplingMode::Exact, opts),
        AttributionScheme::BanzhafSampled { n, seed } => {
            banzhaf_attribution(model, x, need()?, SamplingMode::Sampled { n: *n, seed: *seed }, opts)
        }
        AttributionScheme::LimeKernel {
            n_samples,
            kernel_width,
            seed,
        } => lime_fit(model, x, need()?, *n_samples, *kernel_width, *seed, opts),
    }
}
