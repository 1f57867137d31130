//! Random model generators and brute-force oracles shared by the
//! integration tests.
#![allow(dead_code)]

pub mod cli;

use posthoc::model::{Activation, DenseLayer, Link, ModelSpec, OutputKind, TreeNode};
use posthoc::{DataPoint, FeatureSpec, Model, Schema};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const BOUND: f64 = 3.0;

pub fn schema(d: usize) -> Schema {
    Schema::new((0..d).map(|k| FeatureSpec::continuous(format!("f{k}")).with_bounds(-BOUND, BOUND)).collect())
        .unwrap()
}

pub fn point(rng: &mut ChaCha8Rng, d: usize) -> DataPoint {
    DataPoint::new((0..d).map(|_| rng.gen_range(-BOUND..BOUND)).collect())
}

pub fn linear(rng: &mut ChaCha8Rng, d: usize) -> Model {
    let weights = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Model::new(
        schema(d),
        ModelSpec::Linear {
            weights,
            bias: rng.gen_range(-1.0..1.0),
            link: Link::Identity,
        },
        OutputKind::Score,
        vec![],
    )
    .unwrap()
}

/// A one- or two-hidden-layer network. Input columns listed in `zeroed`
/// get zero weights, so those features are dummies.
pub fn mlp(rng: &mut ChaCha8Rng, d: usize, activation: Activation, zeroed: &[usize]) -> Model {
    let mut widths = vec![d, rng.gen_range(2..=6)];
    if rng.gen_bool(0.5) {
        widths.push(rng.gen_range(2..=5));
    }
    widths.push(1);
    let layers = widths
        .windows(2)
        .enumerate()
        .map(|(i, w)| DenseLayer {
            weights: (0..w[1])
                .map(|_| {
                    (0..w[0])
                        .map(|k| if i == 0 && zeroed.contains(&k) { 0.0 } else { rng.gen_range(-1.0..1.0) })
                        .collect()
                })
                .collect(),
            bias: (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            activation: if i + 2 == widths.len() { Activation::Identity } else { activation },
        })
        .collect();
    Model::new(schema(d), ModelSpec::Mlp { layers }, OutputKind::Score, vec![]).unwrap()
}

/// A random tree of depth at most `depth` that never splits on `unused`.
pub fn tree(rng: &mut ChaCha8Rng, d: usize, depth: usize, unused: &[usize]) -> Model {
    fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>, d: usize, depth: usize, unused: &[usize]) -> usize {
        let id = nodes.len();
        let usable: Vec<usize> = (0..d).filter(|k| !unused.contains(k)).collect();
        if depth == 0 || usable.is_empty() || rng.gen_bool(0.2) {
            nodes.push(TreeNode::Leaf {
                value: vec![rng.gen_range(-2.0..2.0)],
            });
            return id;
        }
        nodes.push(TreeNode::Leaf { value: vec![0.0] });
        let feature = usable[rng.gen_range(0..usable.len())];
        let threshold = rng.gen_range(-BOUND..BOUND);
        let left = grow(rng, nodes, d, depth - 1, unused);
        let right = grow(rng, nodes, d, depth - 1, unused);
        nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
    let mut nodes = Vec::new();
    grow(rng, &mut nodes, d, depth, unused);
    Model::new(schema(d), ModelSpec::Tree { nodes }, OutputKind::Score, vec![]).unwrap()
}

/// Model value at the cube vertex keeping `x_k` where bit k of `mask` is set
/// and `b_k` elsewhere.
pub fn vertex(model: &Model, x: &[f64], b: &[f64], mask: u64) -> f64 {
    let p: Vec<f64> = (0..x.len()).map(|k| if mask >> k & 1 == 1 { x[k] } else { b[k] }).collect();
    model.raw(&p).unwrap()[0]
}

/// Exact Shapley values by averaging marginal contributions over all
/// permutations.
pub fn shapley_by_permutations(f: impl Fn(u64) -> f64, d: usize) -> Vec<f64> {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut all = Vec::new();
    permutations(&mut (0..d).collect(), 0, &mut all);
    let mut phi = vec![0.0; d];
    for order in &all {
        let mut mask = 0u64;
        for &k in order {
            let before = f(mask);
            mask |= 1 << k;
            phi[k] += f(mask) - before;
        }
    }
    phi.iter().map(|v| v / all.len() as f64).collect()
}

/// Banzhaf values as the plain mean over all edges in each direction.
pub fn banzhaf_by_subsets(f: impl Fn(u64) -> f64, d: usize) -> Vec<f64> {
    (0..d)
        .map(|k| {
            let edges: Vec<f64> = (0..1u64 << d)
                .filter(|m| m >> k & 1 == 0)
                .map(|m| f(m | 1 << k) - f(m))
                .collect();
            edges.iter().sum::<f64>() / edges.len() as f64
        })
        .collect()
}
