//! How far a local surrogate can be trusted as a model of the black box.

mod analogy;
mod divergence;

pub use analogy::{classify_analogies, AnalogyClass, AnalogyConfig, AnalogyReport, FeatureAnalogy};
pub use divergence::{compare_schemes, normalized_l1, DivergenceMatrix, SchemeCombo};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::median;
use crate::error::{Error, Result};
use crate::model::{argmax, Model, OutputSelector};
use crate::schema::{DataPoint, FeatureKind, Schema};
use crate::surrogate::SurrogateExplanation;

/// Floor on the interquartile range used to scale residuals.
pub const IQR_FLOOR: f64 = 1e-6;

/// A box `center ± radius·scale` (L∞, MAD units) clipped to the schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub center: DataPoint,
    pub radius: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// Per-feature spread (MAD); ones when no dataset is available.
    pub scale: Vec<f64>,
}

impl RegionSpec {
    pub fn new(center: DataPoint, radius: f64, n_samples: usize, seed: u64, scale: Vec<f64>) -> Self {
        RegionSpec {
            center,
            radius,
            n_samples,
            seed,
            scale,
        }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        schema.validate(&self.center)?;
        schema.check_dim(self.scale.len(), "region scale")?;
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::config("radius must be finite and >= 0"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be at least 1"));
        }
        if let Some(s) = self.scale.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::config(format!("region scale must be positive (got {s})")));
        }
        Ok(())
    }

    /// Per-feature sampling interval, clipped to the schema.
    pub(crate) fn interval(&self, schema: &Schema, k: usize) -> (f64, f64) {
        let f = schema.feature(k);
        let c = self.center[k];
        let h = self.radius * self.scale[k];
        ((c - h).max(f.min_value()), (c + h).min(f.max_value()))
    }

    /// Draws `n_samples` points. Categorical features are redrawn uniformly
    /// with probability `min(1, radius)`; counts are uniform over the
    /// integers in their interval.
    pub fn sample(&self, schema: &Schema) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n_samples)
            .map(|_| {
                (0..schema.dim())
                    .map(|k| {
                        let f = schema.feature(k);
                        let (lo, hi) = self.interval(schema, k);
                        match f.kind {
                            FeatureKind::Continuous if hi > lo => rng.gen_range(lo..=hi),
                            FeatureKind::Continuous => self.center[k],
                            FeatureKind::Count => {
                                let (a, b) = (lo.ceil(), hi.floor());
                                if b > a {
                                    rng.gen_range(a as i64..=b as i64) as f64
                                } else {
                                    self.center[k]
                                }
                            }
                            FeatureKind::Categorical => {
                                if rng.gen::<f64>() < self.radius.min(1.0) {
                                    rng.gen_range(0..f.categories.len()) as f64
                                } else {
                                    self.center[k]
                                }
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Fraction-like agreement between model and surrogate over a region.
///
/// Score outputs: `1 − median|f − g| / max(IQR(f), 1e-6)`, clamped to
/// `[0, 1]`. Class outputs: rate at which "model predicts class k" matches
/// "surrogate probability ≥ 0.5".
pub fn agreement_at(model: &Model, explanation: &SurrogateExplanation, region: &RegionSpec) -> Result<f64> {
    let schema = model.schema();
    region.validate(schema)?;
    if explanation.anchor != region.center {
        return Err(Error::config("explanation is not anchored at the region center"));
    }
    let points = region.sample(schema);
    match explanation.output {
        OutputSelector::Class(k) => {
            let mut hits = 0usize;
            for p in &points {
                let model_says = argmax(&model.raw(p)?) == k;
                let surrogate_says = explanation.predict(p) >= 0.5;
                hits += usize::from(model_says == surrogate_says);
            }
            Ok(hits as f64 / points.len() as f64)
        }
        OutputSelector::Score => {
            let mut f = Vec::with_capacity(points.len());
            let mut resid = Vec::with_capacity(points.len());
            for p in &points {
                let fv = model.scalar(p, OutputSelector::Score)?;
                resid.push((fv - explanation.predict(p)).abs());
                f.push(fv);
            }
            f.sort_by(f64::total_cmp);
            let iqr = (quantile(&f, 0.75) - quantile(&f, 0.25)).max(IQR_FLOOR);
            let m = median(&mut resid);
            Ok((1.0 - m / iqr).clamp(0.0, 1.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityProfile {
    pub radii: Vec<f64>,
    pub agreement: Vec<f64>,
    pub threshold: f64,
    /// Largest tested radius up to which agreement never dropped below
    /// the threshold; `None` if radius index 0 already fails.
    pub validity_radius: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Agreement at each radius (seed `seed + i` for radius `i`).
pub fn validity_profile(
    model: &Model,
    explanation: &SurrogateExplanation,
    scale: &[f64],
    radii: &[f64],
    threshold: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ValidityProfile> {
    if radii.is_empty() {
        return Err(Error::config("at least one radius is required"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("radii must be strictly ascending"));
    }
    if !threshold.is_finite() {
        return Err(Error::config("threshold must be finite"));
    }
    let agreement = radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let region = RegionSpec::new(
                explanation.anchor.clone(),
                r,
                n_samples,
                seed.wrapping_add(i as u64),
                scale.to_vec(),
            );
            agreement_at(model, explanation, &region)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidityProfile {
        validity_radius: validity_radius(radii, &agreement, threshold),
        radii: radii.to_vec(),
        agreement,
        threshold,
        n_samples,
        seed,
    })
}

pub(crate) fn validity_radius(radii: &[f64], agreement: &[f64], threshold: f64) -> Option<f64> {
    radii
        .iter()
        .zip(agreement)
        .take_while(|(_, &a)| a >= threshold)
        .last()
        .map(|(&r, _)| r)
}

impl ValidityProfile {
    pub fn to_json(&self) -> Value {
        json!({
            "radii": self.radii,
            "agreement": self.agreement,
            "threshold": self.threshold,
            "validity_radius": self.validity_radius,
            "config_echo": {
                "n_samples": self.n_samples,
                "radius_units": "mad_linf",
            },
            "seed": self.seed,
        })
    }

    /// `radius,agreement` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,agreement\n");
        for (r, a) in self.radii.iter().zip(&self.agreement) {
            out.push_str(&format!("{r},{a}\n"));
        }
        out
    }
}
