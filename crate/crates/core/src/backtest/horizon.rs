//! Multi-day holding horizons with overlapping cohorts.

use serde::{Deserialize, Serialize};

use crate::attribution::newey_west_mean;
use crate::grid::Grid;
use crate::metrics::{long_short_return, QuantileAssignment};
use crate::stats::TRADING_DAYS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonStat {
    pub horizon: usize,
    pub mean_daily: Option<f64>,
    /// `252 * mean_daily`.
    pub ann_mean: Option<f64>,
    pub nw_t: Option<f64>,
    pub nw_lags: usize,
    pub n: usize,
}

/// Daily spread series for holding horizon `h`.
///
/// Position `j` averages the long-short returns, realized over
/// `fwd[formation[j]]`, of the `h` portfolios formed at positions
/// `j - h + 1 ..= j`. Positions without all `h` cohorts are `None`.
pub fn horizon_series(
    assignments: &[Option<QuantileAssignment>],
    formation: &[usize],
    fwd: &Grid,
    h: usize,
) -> Vec<Option<f64>> {
    assert!(h >= 1, "horizon must be at least 1");
    (0..formation.len())
        .map(|j| {
            if j + 1 < h {
                return None;
            }
            let r = fwd.row(formation[j]);
            let mut sum = 0.0;
            for k in 0..h {
                sum += long_short_return(assignments[j - k].as_ref()?, r)?;
            }
            Some(sum / h as f64)
        })
        .collect()
}

/// Mean daily spread and Newey-West t for horizons `1..=max_h`. The lag
/// count is `max(nw_lags, h - 1)` so that overlap-induced autocorrelation
/// is always covered.
pub fn multi_horizon(
    assignments: &[Option<QuantileAssignment>],
    formation: &[usize],
    fwd: &Grid,
    max_h: usize,
    nw_lags: usize,
) -> Vec<HorizonStat> {
    (1..=max_h)
        .map(|h| {
            let s: Vec<f64> = horizon_series(assignments, formation, fwd, h)
                .into_iter()
                .flatten()
                .collect();
            let lags = nw_lags.max(h - 1);
            let fit = newey_west_mean(&s, lags).ok();
            let mean_daily = fit.map(|f| f.0);
            HorizonStat {
                horizon: h,
                mean_daily,
                ann_mean: mean_daily.map(|m| m * TRADING_DAYS),
                nw_t: fit.map(|f| f.2).filter(|t| t.is_finite()),
                nw_lags: lags,
                n: s.len(),
            }
        })
        .collect()
}
