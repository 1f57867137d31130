//! Per-feature positive / negative / neutral analogy classes.
//!
//! For each feature the model's effect `f(p + δe_k) − f(p)` is compared with
//! the surrogate's effect on paired samples. The Pearson correlation of the
//! two, with a 95% Fisher-z interval, decides the class.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::RegionSpec;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::schema::{FeatureKind, Schema};
use crate::surrogate::SurrogateExplanation;

/// Effects below this magnitude count as "no effect".
pub const NOISE_FLOOR: f64 = 1e-9;
/// Share of pairs that must show no effect for the no-effect rule.
const AGREEMENT_SHARE: f64 = 0.95;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyClass {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalogyConfig {
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub min_samples: usize,
    /// Pair step as a fraction of `radius · MAD_k`.
    pub step_fraction: f64,
}

impl Default for AnalogyConfig {
    fn default() -> Self {
        AnalogyConfig {
            tau_plus: 0.5,
            tau_minus: 0.0,
            min_samples: 30,
            step_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAnalogy {
    pub name: String,
    pub classification: AnalogyClass,
    pub effect_correlation: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyReport {
    pub features: Vec<FeatureAnalogy>,
    pub config: AnalogyConfig,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl AnalogyReport {
    pub fn to_json(&self) -> Value {
        json!({
            "features": self.features,
            "config_echo": {
                "tau_plus": self.config.tau_plus,
                "tau_minus": self.config.tau_minus,
                "min_samples": self.config.min_samples,
                "step_fraction": self.config.step_fraction,
                "radius": self.radius,
                "n_samples": self.n_samples,
            },
            "seed": self.seed,
        })
    }
}

/// Classifies every feature over `region`.
pub fn classify_analogies(
    model: &Model,
    explanation: &SurrogateExplanation,
    region: &RegionSpec,
    config: &AnalogyConfig,
) -> Result<AnalogyReport> {
    let schema = model.schema();
    region.validate(schema)?;
    if !(config.tau_minus <= config.tau_plus) {
        return Err(Error::config("tau_minus must not exceed tau_plus"));
    }
    if !(config.step_fraction.is_finite() && config.step_fraction > 0.0) {
        return Err(Error::config("step_fraction must be positive"));
    }
    let points = region.sample(schema);
    let scalar = |p: &[f64]| model.scalar(p, explanation.output);

    let mut features = Vec::with_capacity(schema.dim());
    for k in 0..schema.dim() {
        let delta = config.step_fraction * region.radius * region.scale[k];
        let mut df = Vec::with_capacity(points.len());
        let mut dg = Vec::with_capacity(points.len());
        for p in &points {
            let (a, b) = pair(schema, p, k, delta);
            df.push(scalar(&b)? - scalar(&a)?);
            dg.push(explanation.predict(&b) - explanation.predict(&a));
        }
        let n = points.len();
        let (classification, r, lo, hi) = if n < config.min_samples {
            (AnalogyClass::Neutral, correlation(&df, &dg), -1.0, 1.0)
        } else {
            let quiet = df
                .iter()
                .zip(&dg)
                .filter(|(f, g)| f.abs() < NOISE_FLOOR && g.abs() < NOISE_FLOOR)
                .count();
            if quiet as f64 >= AGREEMENT_SHARE * n as f64 {
                (AnalogyClass::Positive, 1.0, 1.0, 1.0)
            } else {
                let r = correlation(&df, &dg);
                let (lo, hi) = fisher_interval(r, n);
                let class = if lo > config.tau_plus {
                    AnalogyClass::Positive
                } else if hi < config.tau_minus {
                    AnalogyClass::Negative
                } else {
                    AnalogyClass::Neutral
                };
                (class, r, lo, hi)
            }
        };
        features.push(FeatureAnalogy {
            name: schema.feature(k).name.clone(),
            classification,
            effect_correlation: r,
            ci_low: lo,
            ci_high: hi,
            n_effective: n,
        });
    }
    Ok(AnalogyReport {
        features,
        config: *config,
        radius: region.radius,
        n_samples: region.n_samples,
        seed: region.seed,
    })
}

/// The pair `(p, p + δe_k)`, shifted to `(p − δe_k, p)` when the upper
/// point leaves the schema. Counts step by at least 1; categoricals step to
/// the next category.
fn pair(schema: &Schema, p: &[f64], k: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
    let f = schema.feature(k);
    let mut a = p.to_vec();
    let mut b = p.to_vec();
    match f.kind {
        FeatureKind::Categorical => {
            b[k] = ((p[k] as usize + 1) % f.categories.len()) as f64;
        }
        kind => {
            let step = if kind == FeatureKind::Count { delta.round().max(1.0) } else { delta };
            if p[k] + step <= f.max_value() {
                b[k] = p[k] + step;
            } else {
                a[k] = f.project(p[k] - step);
            }
        }
    }
    (a, b)
}

/// Pearson correlation. When either series is constant (the usual case
/// for a linear surrogate, whose effect is `w_k·δ` on every pair) the
/// uncentered correlation is used instead, which still tells agreeing,
/// opposing and inconsistent effects apart.
fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let flat = |s: f64, m: f64| s <= 1e-24 * n * (1.0 + m * m);
    if flat(saa, ma) || flat(sbb, mb) {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum();
        let nb: f64 = b.iter().map(|y| y * y).sum();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        return (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// 95% interval for a correlation from `n` pairs.
fn fisher_interval(r: f64, n: usize) -> (f64, f64) {
    if n <= 3 {
        return (-1.0, 1.0);
    }
    let z = r.atanh();
    let se = 1.0 / ((n - 3) as f64).sqrt();
    ((z - Z_95 * se).tanh(), (z + Z_95 * se).tanh())
}
