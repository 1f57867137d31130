//! Derivative-free inner optimizers over a box with discrete coordinates.
//!
//! Every point handed to the objective has already been projected into the
//! box (and rounded on discrete coordinates).

use crate::error::Result;

/// Feasible box of the free coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Space {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub discrete: Vec<bool>,
    /// Characteristic step per coordinate (MAD or 1).
    pub scale: Vec<f64>,
}

impl Space {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn project(&self, v: &mut [f64]) {
        for (k, x) in v.iter_mut().enumerate() {
            let r = if self.discrete[k] { x.round() } else { *x };
            *x = r.clamp(self.lo[k], self.hi[k]);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Objective wrapper that counts calls and enforces the budget.
struct Counted<'a, F> {
    f: &'a mut F,
    evals: usize,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<'_, F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }

    fn call(&mut self, x: &[f64]) -> Result<f64> {
        self.evals += 1;
        let v = (self.f)(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

/// Nelder–Mead with projection of every vertex. When the simplex collapses
/// while budget remains, it is rebuilt around the best vertex with a ten
/// times smaller step (at most twice).
pub(crate) fn nelder_mead<F>(f: &mut F, space: &Space, start: &[f64], budget: usize) -> Result<Outcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = space.dim();
    let mut obj = Counted { f, evals: 0, budget };
    let mut best = start.to_vec();
    space.project(&mut best);
    let mut best_val = obj.call(&best)?;
    if n == 0 {
        return Ok(Outcome {
            point: best,
            value: best_val,
            evals: obj.evals,
        });
    }

    let mut step_factor = 1.0;
    for _round in 0..3 {
        if obj.exhausted() {
            break;
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(best.clone(), best_val)];
        for k in 0..n {
            let mut v = best.clone();
            let h = (space.scale[k] * step_factor).max(1e-12);
            v[k] += if v[k] + h <= space.hi[k] { h } else { -h };
            space.project(&mut v);
            let fv = obj.call(&v)?;
            simplex.push((v, fv));
        }
        let before = best_val;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo_v, hi_v) = (simplex[0].1, simplex[n].1);
            let size = simplex[1..]
                .iter()
                .map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if obj.exhausted() || (hi_v - lo_v).abs() <= 1e-13 * (1.0 + lo_v.abs()) || size <= 1e-11 {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect();
                space.project(&mut p);
                p
            };
            let xr = along(-1.0);
            let fr = obj.call(&xr)?;
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = obj.call(&xe)?;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(-0.5);
                    let fc = obj.call(&xc)?;
                    (xc, fc)
                } else {
                    let xc = along(0.5);
                    let fc = obj.call(&xc)?;
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let anchor = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let mut p: Vec<f64> = vertex.0.iter().zip(&anchor).map(|(v, a)| a + 0.5 * (v - a)).collect();
                        space.project(&mut p);
                        let fp = obj.call(&p)?;
                        *vertex = (p, fp);
                        if obj.exhausted() {
                            break;
                        }
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best_val {
            best = simplex[0].0.clone();
            best_val = simplex[0].1;
        }
        if best_val >= before && step_factor < 1.0 {
            break;
        }
        step_factor *= 0.1;
    }
    Ok(Outcome {
        point: best,
        value: best_val,
        evals: obj.evals,
    })
}

/// Widest discrete sweep per coordinate.
const MAX_SWEEP: f64 = 400.0;
const COARSE_POINTS: usize = 40;

/// Cyclic coordinate descent. Discrete coordinates are swept exhaustively
/// (within a window of ±200 when unbounded); continuous ones get a coarse
/// scan over ±10 steps followed by a halving pattern search.
pub(crate) fn coordinate_descent<F>(f: &mut F, space: &Space, start: &[f64], budget: usize) -> Result<Outcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = space.dim();
    let mut obj = Counted { f, evals: 0, budget };
    let mut x = start.to_vec();
    space.project(&mut x);
    let mut fx = obj.call(&x)?;
    loop {
        let at_pass_start = fx;
        for k in 0..n {
            if obj.exhausted() {
                break;
            }
            let current = x[k];
            let try_value = |v: f64, x: &mut Vec<f64>, fx: &mut f64, obj: &mut Counted<'_, F>| -> Result<bool> {
                let mut cand = x.clone();
                cand[k] = v;
                space.project(&mut cand);
                if cand[k] == x[k] || obj.exhausted() {
                    return Ok(false);
                }
                let fc = obj.call(&cand)?;
                if fc < *fx {
                    *x = cand;
                    *fx = fc;
                    return Ok(true);
                }
                Ok(false)
            };
            if space.discrete[k] {
                let lo = space.lo[k].max(current - MAX_SWEEP / 2.0).ceil();
                let hi = space.hi[k].min(current + MAX_SWEEP / 2.0).floor();
                let mut v = lo;
                while v <= hi {
                    try_value(v, &mut x, &mut fx, &mut obj)?;
                    v += 1.0;
                }
            } else {
                let s = space.scale[k];
                let lo = space.lo[k].max(current - 10.0 * s);
                let hi = space.hi[k].min(current + 10.0 * s);
                let width = hi - lo;
                if width > 0.0 {
                    for i in 0..=COARSE_POINTS {
                        let v = lo + width * i as f64 / COARSE_POINTS as f64;
                        try_value(v, &mut x, &mut fx, &mut obj)?;
                    }
                }
                let mut h = (width / COARSE_POINTS as f64).max(s * 1e-3);
                while h > 1e-10 * s.max(1.0) && !obj.exhausted() {
                    let base = x[k];
                    if !try_value(base + h, &mut x, &mut fx, &mut obj)? && !try_value(base - h, &mut x, &mut fx, &mut obj)? {
                        h *= 0.5;
                    }
                }
            }
        }
        if obj.exhausted() || fx >= at_pass_start - 1e-15 * (1.0 + at_pass_start.abs()) {
            break;
        }
    }
    Ok(Outcome {
        point: x,
        value: fx,
        evals: obj.evals,
    })
}

/// Projected gradient descent on central-difference gradients with
/// backtracking from `step`.
pub(crate) fn fd_gradient_descent<F>(
    f: &mut F,
    space: &Space,
    start: &[f64],
    budget: usize,
    step: f64,
) -> Result<Outcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = space.dim();
    let mut obj = Counted { f, evals: 0, budget };
    let mut x = start.to_vec();
    space.project(&mut x);
    let mut fx = obj.call(&x)?;
    while !obj.exhausted() {
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let h = 1e-6 * space.scale[k].max(1e-12);
            let mut up = x.clone();
            up[k] += h;
            space.project(&mut up);
            let mut down = x.clone();
            down[k] -= h;
            space.project(&mut down);
            if up[k] == down[k] {
                continue;
            }
            grad[k] = (obj.call(&up)? - obj.call(&down)?) / (up[k] - down[k]);
        }
        let mut t = step;
        let mut moved = false;
        for _ in 0..40 {
            if obj.exhausted() {
                break;
            }
            let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - t * g).collect();
            space.project(&mut cand);
            let fc = obj.call(&cand)?;
            if fc < fx {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(Outcome {
        point: x,
        value: fx,
        evals: obj.evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(n: usize) -> Space {
        Space {
            lo: vec![-10.0; n],
            hi: vec![10.0; n],
            discrete: vec![false; n],
            scale: vec![1.0; n],
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let mut f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2));
        let out = nelder_mead(&mut f, &free(2), &[0.0, 0.0], 5000).unwrap();
        assert!((out.point[0] - 1.0).abs() < 1e-5 && (out.point[1] + 2.0).abs() < 1e-5);
    }

    #[test]
    fn every_evaluated_point_is_in_the_box() {
        let space = Space {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
            discrete: vec![false, false],
            scale: vec![1.0, 1.0],
        };
        let mut seen = Vec::new();
        let mut f = |x: &[f64]| {
            seen.push(x.to_vec());
            Ok(-(x[0] + x[1]))
        };
        let out = nelder_mead(&mut f, &space, &[0.5, 0.5], 500).unwrap();
        assert!(seen.iter().all(|p| p.iter().all(|v| (0.0..=1.0).contains(v))));
        assert!((out.value + 2.0).abs() < 1e-9);
    }

    #[test]
    fn coordinate_descent_sweeps_discrete_values() {
        let space = Space {
            lo: vec![0.0],
            hi: vec![6.0],
            discrete: vec![true],
            scale: vec![1.0],
        };
        // a step function only a sweep can see
        let mut f = |x: &[f64]| Ok(if x[0] <= 2.0 { (4.0 - x[0]) * 0.1 } else { 5.0 });
        let out = coordinate_descent(&mut f, &space, &[4.0], 100).unwrap();
        assert_eq!(out.point, vec![2.0]);
    }

    #[test]
    fn budget_is_respected() {
        let mut calls = 0;
        let mut f = |x: &[f64]| {
            calls += 1;
            Ok(x.iter().map(|v| v.abs()).sum::<f64>())
        };
        let out = coordinate_descent(&mut f, &free(3), &[3.0, -2.0, 1.0], 25).unwrap();
        assert!(out.evals <= 25);
        assert_eq!(calls, out.evals);
    }

    #[test]
    fn gradient_descent_on_smooth_bowl() {
        let mut f = |x: &[f64]| Ok((x[0] - 0.5).powi(2) + (x[1] - 0.25).powi(2));
        let out = fd_gradient_descent(&mut f, &free(2), &[3.0, 3.0], 2000, 0.5).unwrap();
        assert!(out.value < 1e-10);
    }
}
