//! OLS with Newey-West (Bartlett kernel) covariance.

use nalgebra::{DMatrix, DVector};

use super::AttributionError;

/// Smallest allowed ratio of the smallest to the largest singular value of
/// the scaled design matrix.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub resid: Vec<f64>,
    pub lags: usize,
}

/// `floor(4 * (T / 100)^(2/9))`.
pub fn auto_lags(n_obs: usize) -> usize {
    (4.0 * (n_obs as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Regresses `y` on the columns of `x` (include a column of ones for an
/// intercept). Standard errors use the Bartlett-weighted sandwich with
/// `lags` lags and no small-sample correction; `lags = 0` is White's HC0.
pub fn ols_newey_west(y: &[f64], x: &DMatrix<f64>, lags: usize) -> Result<OlsFit, AttributionError> {
    let (n, k) = x.shape();
    assert_eq!(n, y.len());
    if n <= k {
        return Err(AttributionError::TooFewObservations { n, k });
    }
    check_rank(x)?;
    let yv = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let chol = xtx
        .clone()
        .cholesky()
        .ok_or(AttributionError::Collinear)?;
    let beta = chol.solve(&(x.transpose() * &yv));
    let resid = &yv - x * &beta;
    let xtx_inv = chol.inverse();

    let mut s = DMatrix::<f64>::zeros(k, k);
    for t in 0..n {
        let xt = x.row(t).transpose();
        s += &xt * xt.transpose() * (resid[t] * resid[t]);
    }
    for l in 1..=lags.min(n - 1) {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let mut g = DMatrix::<f64>::zeros(k, k);
        for t in l..n {
            let xt = x.row(t).transpose();
            let xl = x.row(t - l).transpose();
            g += &xt * xl.transpose() * (resid[t] * resid[t - l]);
        }
        s += (&g + g.transpose()) * w;
    }
    let cov = &xtx_inv * s * &xtx_inv;
    let se: Vec<f64> = (0..k).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let coef: Vec<f64> = beta.iter().copied().collect();
    let t = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    Ok(OlsFit {
        coef,
        se,
        t,
        resid: resid.iter().copied().collect(),
        lags,
    })
}

fn check_rank(x: &DMatrix<f64>) -> Result<(), AttributionError> {
    // Scale columns to unit norm so the test is about collinearity, not units.
    let mut xs = x.clone();
    for mut c in xs.column_iter_mut() {
        let norm = c.norm();
        if norm == 0.0 {
            return Err(AttributionError::Collinear);
        }
        c /= norm;
    }
    let sv = xs.singular_values();
    let max = sv.max();
    let min = sv.min();
    if !(min > RANK_TOL * max) {
        return Err(AttributionError::Collinear);
    }
    Ok(())
}

/// Mean of `y` with its Newey-West standard error and t-statistic.
pub fn newey_west_mean(y: &[f64], lags: usize) -> Result<(f64, f64, f64), AttributionError> {
    let x = DMatrix::from_element(y.len(), 1, 1.0);
    let fit = ols_newey_west(y, &x, lags)?;
    Ok((fit.coef[0], fit.se[0], fit.t[0]))
}
