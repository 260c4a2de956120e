//! Least squares with an optional ridge penalty on the slopes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_schema, AggregationError, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub names: Vec<String>,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub ridge: f64,
}

impl LinearModel {
    /// Missing where any feature is missing.
    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<f64>, AggregationError> {
        check_schema(&self.names, fm)?;
        Ok((0..fm.n_rows())
            .map(|i| {
                let row = fm.row(i);
                if row.iter().any(|v| !v.is_finite()) {
                    return f64::NAN;
                }
                self.intercept + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>()
            })
            .collect())
    }
}

/// Minimizes `sum (y - a - x'b)^2 + ridge * |b|^2` over rows where every
/// feature and the target are finite.
pub fn fit_linear(fm: &FeatureMatrix, ridge: f64) -> Result<LinearModel, AggregationError> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(AggregationError::InvalidParams(format!("ridge {ridge}")));
    }
    let m = fm.n_features();
    if m == 0 {
        return Err(AggregationError::NoFactors);
    }
    let rows: Vec<usize> = (0..fm.n_rows())
        .filter(|&i| fm.y[i].is_finite() && fm.row(i).iter().all(|v| v.is_finite()))
        .collect();
    let n = rows.len();
    if n < m + 1 {
        return Err(AggregationError::TooFewRows { need: m + 1, have: n });
    }
    let mut x_mean = vec![0.0; m];
    let mut y_mean = 0.0;
    for &i in &rows {
        for (j, v) in fm.row(i).iter().enumerate() {
            x_mean[j] += v;
        }
        y_mean += fm.y[i];
    }
    x_mean.iter_mut().for_each(|v| *v /= n as f64);
    y_mean /= n as f64;

    let xc = DMatrix::from_fn(n, m, |r, j| fm.get(rows[r], j) - x_mean[j]);
    let yc = DVector::from_iterator(n, rows.iter().map(|&i| fm.y[i] - y_mean));
    if ridge == 0.0 && !full_rank(&xc) {
        return Err(AggregationError::Singular);
    }
    let mut a = xc.transpose() * &xc;
    for j in 0..m {
        a[(j, j)] += ridge;
    }
    let b = xc.transpose() * yc;
    let beta = a.cholesky().ok_or(AggregationError::Singular)?.solve(&b);
    let weights: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - x_mean.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>();
    Ok(LinearModel {
        names: fm.names.clone(),
        intercept,
        weights,
        ridge,
    })
}

/// Column-scaled singular value ratio above 1e-10; a zero column is rank deficient.
fn full_rank(x: &DMatrix<f64>) -> bool {
    let mut scaled = x.clone();
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        if norm == 0.0 {
            return false;
        }
        col /= norm;
    }
    let sv = scaled.singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() / max > 1e-10
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    /// Gaussian elimination with partial pivoting on the full normal
    /// equations, intercept column included.
    fn oracle(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let k = rows[0].len() + 1;
        let mut a = vec![vec![0.0; k + 1]; k];
        for (r, &yi) in rows.iter().zip(y) {
            let z: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
            for p in 0..k {
                for q in 0..k {
                    a[p][q] += z[p] * z[q];
                }
                a[p][k] += z[p] * yi;
            }
        }
        for c in 0..k {
            let piv = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, piv);
            for r in 0..k {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for q in c..=k {
                        a[r][q] -= f * a[c][q];
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k] / a[i][i]).collect()
    }

    #[test]
    fn exact_recovery() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 - 2.5 * r[0]).collect();
        let m = fit_linear(&FeatureMatrix::from_rows(names(1), &rows, &y), 0.0).unwrap();
        assert!((m.weights[0] + 2.5).abs() < 1e-8);
        assert!((m.intercept - 0.5).abs() < 1e-8);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.1 + r[0] - 0.3 * r[1] + 0.7 * r[2] + rng.random_range(-0.5..0.5))
            .collect();
        let m = fit_linear(&FeatureMatrix::from_rows(names(3), &rows, &y), 0.0).unwrap();
        let o = oracle(&rows, &y);
        assert!((m.intercept - o[0]).abs() < 1e-8);
        for j in 0..3 {
            assert!((m.weights[j] - o[j + 1]).abs() < 1e-8);
        }
        // residuals orthogonal to each column
        let fm = FeatureMatrix::from_rows(names(3), &rows, &y);
        let pred = m.predict(&fm).unwrap();
        for j in 0..3 {
            let dot: f64 = rows.iter().zip(&y).zip(&pred).map(|((r, yi), p)| r[j] * (yi - p)).sum();
            assert!(dot.abs() < 1e-8);
        }
    }

    #[test]
    fn heavy_ridge_shrinks_to_mean() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i) as f64 * 0.01]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + r[0]).collect();
        let m = fit_linear(&FeatureMatrix::from_rows(names(2), &rows, &y), 1e14).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-8));
        let mean = y.iter().sum::<f64>() / 30.0;
        assert!((m.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn collinear_needs_ridge() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fm = FeatureMatrix::from_rows(names(2), &rows, &y);
        assert!(matches!(fit_linear(&fm, 0.0), Err(AggregationError::Singular)));
        assert!(fit_linear(&fm, 1.0).is_ok());
    }

    #[test]
    fn zero_weights_predict_intercept_and_schema_checked() {
        let m = LinearModel {
            names: names(1),
            intercept: 0.25,
            weights: vec![0.0],
            ridge: 0.0,
        };
        let fm = FeatureMatrix::from_rows(names(1), &[vec![3.0], vec![-1.0]], &[0.0, 0.0]);
        assert_eq!(m.predict(&fm).unwrap(), vec![0.25, 0.25]);
        let other = FeatureMatrix::from_rows(vec!["g".into()], &[vec![1.0]], &[0.0]);
        assert!(matches!(m.predict(&other), Err(AggregationError::Schema { .. })));
    }
}
