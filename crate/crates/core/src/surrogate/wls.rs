//! Weighted least squares with an intercept column.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge penalty used when the normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Weighted R²; 1 when the target is constant and fitted exactly.
    pub r_squared: f64,
    pub regularized: bool,
}

/// Minimises `Σ w_i (y_i − a − β·x_i)²`.
pub fn weighted_least_squares(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<WlsFit> {
    let n = rows.len();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(Error::config("weighted least squares needs matching, non-empty rows/targets/weights"));
    }
    let p = rows[0].len() + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let wv = DVector::from_column_slice(w);
    let yv = DVector::from_column_slice(y);
    let weighted = DMatrix::from_fn(n, p, |i, j| design[(i, j)] * wv[i]);
    let mut normal = weighted.transpose() * &design;
    let rhs = weighted.transpose() * &yv;

    let sv = normal.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    let singular = !(smin > 1e-12 * smax.max(f64::MIN_POSITIVE));
    if singular {
        for j in 1..p {
            normal[(j, j)] += RIDGE_FALLBACK;
        }
    }
    let beta = match normal.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => normal
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::config("weighted least squares system is singular even after ridge"))?,
    };

    let fitted = &design * &beta;
    let wsum: f64 = w.iter().sum();
    let ybar = w.iter().zip(y).map(|(wi, yi)| wi * yi).sum::<f64>() / wsum;
    let ss_res: f64 = (0..n).map(|i| w[i] * (y[i] - fitted[i]).powi(2)).sum();
    let ss_tot: f64 = (0..n).map(|i| w[i] * (y[i] - ybar).powi(2)).sum();
    let r_squared = if ss_tot > 1e-300 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 * wsum {
        1.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(WlsFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        r_squared,
        regularized: singular,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_function() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64 % 5.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
        let w = vec![1.0, 2.0, 0.5, 1.0, 3.0, 1.0];
        let fit = weighted_least_squares(&rows, &y, &w).unwrap();
        assert!((fit.intercept - 1.5).abs() < 1e-10);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(!fit.regularized);
    }

    #[test]
    fn and_on_the_square() {
        // by hand: residuals ±0.25 are orthogonal to 1, z1, z2
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let fit = weighted_least_squares(&rows, &[0.0, 0.0, 0.0, 1.0], &[1.0; 4]).unwrap();
        assert!((fit.intercept + 0.25).abs() < 1e-12);
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-12);
        assert!((fit.coefficients[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_design_falls_back_to_ridge() {
        // second column is constant 1, collinear with the intercept
        let rows = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]];
        let fit = weighted_least_squares(&rows, &[1.0, 2.0, 3.0], &[1.0; 3]).unwrap();
        assert!(fit.regularized);
        let pred = |r: &[f64]| fit.intercept + fit.coefficients[0] * r[0] + fit.coefficients[1] * r[1];
        assert!((pred(&rows[2]) - 3.0).abs() < 1e-6);
    }
}
