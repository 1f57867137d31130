//! Global decision-tree distillation of a black box over a sampled region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{argmax, Model, ModelSpec, OutputKind, TreeNode};
use crate::schema::{FeatureKind, Schema};

/// Inputs and raw outputs of a batch of sampled points.
type Samples = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Axis-aligned box to sample from, one `[lower, upper]` per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSampling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RegionSampling {
    /// The schema's own bounds; every non-categorical feature must be bounded.
    pub fn from_schema(schema: &Schema) -> Result<Self> {
        let mut lower = Vec::with_capacity(schema.dim());
        let mut upper = Vec::with_capacity(schema.dim());
        for f in schema.features() {
            let (lo, hi) = (f.min_value(), f.max_value());
            if !lo.is_finite() || !hi.is_finite() {
                return Err(f.invalid("region sampling needs finite bounds"));
            }
            lower.push(lo);
            upper.push(hi);
        }
        Ok(Self { lower, upper })
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        schema.check_dim(self.lower.len(), "region lower bounds")?;
        schema.check_dim(self.upper.len(), "region upper bounds")?;
        let mut degenerate = true;
        for (f, (&lo, &hi)) in schema.features().iter().zip(self.lower.iter().zip(&self.upper)) {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(f.invalid(format!("bad region [{lo}, {hi}]")));
            }
            let span = if f.is_discrete() { hi.floor() - lo.ceil() } else { hi - lo };
            if span < 0.0 {
                return Err(f.invalid(format!("region [{lo}, {hi}] holds no valid value")));
            }
            if span > 0.0 {
                degenerate = false;
            }
        }
        if degenerate {
            return Err(Error::config("region has zero volume"));
        }
        Ok(())
    }

    pub(crate) fn sample(&self, schema: &Schema, rng: &mut ChaCha8Rng) -> Vec<f64> {
        schema
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| {
                let (lo, hi) = (self.lower[j], self.upper[j]);
                match f.kind {
                    FeatureKind::Continuous if hi > lo => rng.gen_range(lo..=hi),
                    FeatureKind::Continuous => lo,
                    _ => {
                        let (a, b) = (lo.ceil() as i64, hi.floor() as i64);
                        rng.gen_range(a..=b) as f64
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSurrogateConfig {
    pub max_depth: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub min_leaf: usize,
}

impl TreeSurrogateConfig {
    pub fn new(max_depth: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            max_depth,
            n_samples,
            seed,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GlobalTreeSurrogate {
    pub tree: Model,
    pub region: RegionSampling,
    /// R² (clamped to [0,1]) for score models, label agreement for classifiers,
    /// measured on held-out draws.
    pub fidelity: f64,
    pub depth: usize,
    pub n_train: usize,
    pub n_holdout: usize,
}

struct Builder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [Vec<f64>],
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
    depth: usize,
}

fn mean_of(ys: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let k = ys[0].len();
    let mut m = vec![0.0; k];
    for &i in idx {
        for (a, v) in m.iter_mut().zip(&ys[i]) {
            *a += v;
        }
    }
    m.iter_mut().for_each(|a| *a /= idx.len() as f64);
    m
}

fn sse(ys: &[Vec<f64>], idx: &[usize]) -> f64 {
    let m = mean_of(ys, idx);
    idx.iter()
        .map(|&i| ys[i].iter().zip(&m).map(|(v, mv)| (v - mv).powi(2)).sum::<f64>())
        .sum()
}

impl Builder<'_> {
    /// Best (feature, threshold, gain) by variance reduction.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let k = self.ys[0].len();
        let parent = sse(self.ys, idx);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for j in 0..self.xs[0].len() {
            sorted.sort_by(|&a, &b| self.xs[a][j].total_cmp(&self.xs[b][j]).then(a.cmp(&b)));
            let n = sorted.len();
            let (mut sum_l, mut sq_l) = (vec![0.0; k], 0.0);
            let mut sum_r = vec![0.0; k];
            let mut sq_r = 0.0;
            for &i in &sorted {
                for (c, v) in self.ys[i].iter().enumerate() {
                    sum_r[c] += v;
                    sq_r += v * v;
                }
            }
            for pos in 0..n - 1 {
                let i = sorted[pos];
                for (c, v) in self.ys[i].iter().enumerate() {
                    sum_l[c] += v;
                    sum_r[c] -= v;
                    sq_l += v * v;
                    sq_r -= v * v;
                }
                let (nl, nr) = (pos + 1, n - pos - 1);
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let (a, b) = (self.xs[i][j], self.xs[sorted[pos + 1]][j]);
                if a == b {
                    continue;
                }
                let child = sq_l - sum_l.iter().map(|s| s * s).sum::<f64>() / nl as f64 + sq_r
                    - sum_r.iter().map(|s| s * s).sum::<f64>() / nr as f64;
                let gain = parent - child;
                if best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, 0.5 * (a + b), gain));
                }
            }
        }
        best.filter(|&(_, _, g)| g > 1e-12 * parent.max(1e-300) && parent > 1e-24)
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: mean_of(self.ys, &idx),
        });
        self.depth = self.depth.max(depth);
        if depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return me;
        }
        if let Some((feature, threshold, _)) = self.best_split(&idx) {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
            let left = self.build(l, depth + 1);
            let right = self.build(r, depth + 1);
            self.nodes[me] = TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        me
    }
}

/// Fits a CART regression tree (greedy variance reduction, minimum leaf
/// size `min_leaf`) to model-labelled samples and measures its fidelity on
/// a disjoint set of further draws from the same seeded stream.
pub fn global_tree_surrogate(
    model: &Model,
    region: &RegionSampling,
    config: &TreeSurrogateConfig,
) -> Result<GlobalTreeSurrogate> {
    if config.max_depth == 0 {
        return Err(Error::config("max_depth must be at least 1"));
    }
    if config.n_samples == 0 || config.min_leaf == 0 {
        return Err(Error::config("n_samples and min_leaf must be positive"));
    }
    let schema = model.schema();
    region.validate(schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<Samples> {
        let xs: Vec<Vec<f64>> = (0..config.n_samples).map(|_| region.sample(schema, rng)).collect();
        let ys = xs.iter().map(|x| model.raw(x)).collect::<Result<Vec<_>>>()?;
        Ok((xs, ys))
    };
    let (train_x, train_y) = draw(&mut rng)?;
    let (test_x, test_y) = draw(&mut rng)?;

    let mut builder = Builder {
        xs: &train_x,
        ys: &train_y,
        min_leaf: config.min_leaf,
        max_depth: config.max_depth,
        nodes: Vec::new(),
        depth: 0,
    };
    builder.build((0..train_x.len()).collect(), 0);
    let depth = builder.depth;
    let nodes = builder.nodes;
    let tree = Model::new(
        schema.clone(),
        ModelSpec::Tree { nodes },
        model.output_kind(),
        model.classes().to_vec(),
    )?;

    let predicted = test_x.iter().map(|x| tree.raw(x)).collect::<Result<Vec<_>>>()?;
    let fidelity = match model.output_kind() {
        OutputKind::ClassProbabilities => {
            let hits = predicted
                .iter()
                .zip(&test_y)
                .filter(|(p, y)| argmax(p) == argmax(y))
                .count();
            hits as f64 / test_y.len() as f64
        }
        OutputKind::Score => {
            let y: Vec<f64> = test_y.iter().map(|v| v[0]).collect();
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let ss_res: f64 = y.iter().zip(&predicted).map(|(v, p)| (v - p[0]).powi(2)).sum();
            if ss_tot <= 1e-24 {
                if ss_res <= 1e-24 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
            }
        }
    };
    Ok(GlobalTreeSurrogate {
        tree,
        region: region.clone(),
        fidelity,
        depth,
        n_train: train_x.len(),
        n_holdout: test_x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureSpec;

    fn unit_square() -> Schema {
        Schema::new(vec![
            FeatureSpec::continuous("x1").with_bounds(0.0, 1.0),
            FeatureSpec::continuous("x2").with_bounds(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn constant_model_gives_a_single_leaf() {
        let m = Model::linear(unit_square(), vec![0.0, 0.0], 0.3).unwrap();
        let region = RegionSampling::from_schema(m.schema()).unwrap();
        let s = global_tree_surrogate(&m, &region, &TreeSurrogateConfig::new(3, 200, 1)).unwrap();
        assert_eq!(s.depth, 0);
        assert_eq!(s.fidelity, 1.0);
    }

    #[test]
    fn diagonal_needs_more_than_one_split() {
        let m = Model::linear(unit_square(), vec![1.0, 1.0], 0.0).unwrap();
        let region = RegionSampling::from_schema(m.schema()).unwrap();
        let s = global_tree_surrogate(&m, &region, &TreeSurrogateConfig::new(1, 500, 3)).unwrap();
        assert_eq!(s.depth, 1);
        assert!(s.fidelity < 1.0);
    }

    #[test]
    fn zero_volume_and_depth_zero_rejected() {
        let m = Model::linear(unit_square(), vec![1.0, 1.0], 0.0).unwrap();
        let point = RegionSampling {
            lower: vec![0.5, 0.5],
            upper: vec![0.5, 0.5],
        };
        assert!(global_tree_surrogate(&m, &point, &TreeSurrogateConfig::new(2, 100, 0)).is_err());
        let region = RegionSampling::from_schema(m.schema()).unwrap();
        assert!(global_tree_surrogate(&m, &region, &TreeSurrogateConfig::new(0, 100, 0)).is_err());
    }

    #[test]
    fn unbounded_schema_cannot_define_a_region() {
        let s = Schema::new(vec![FeatureSpec::continuous("free")]).unwrap();
        assert!(RegionSampling::from_schema(&s).is_err());
    }
}
