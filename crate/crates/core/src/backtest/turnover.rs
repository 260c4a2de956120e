//! Drifted-weight turnover and linear transaction costs.

use serde::{Deserialize, Serialize};

use super::{BacktestError, PortfolioWeights};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Basis points charged per unit of traded notional.
    pub one_way_bps: f64,
    /// Multiplier applied to turnover before charging; 1 for the
    /// per-side convention used by [`turnover`].
    pub gross_exposure_scale: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            one_way_bps: 3.0,
            gross_exposure_scale: 1.0,
        }
    }
}

impl CostModel {
    pub fn new(one_way_bps: f64) -> Result<Self, BacktestError> {
        let c = Self {
            one_way_bps,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.one_way_bps >= 0.0 && self.one_way_bps.is_finite()) {
            return Err(BacktestError::InvalidCost(self.one_way_bps));
        }
        if !(self.gross_exposure_scale >= 0.0 && self.gross_exposure_scale.is_finite()) {
            return Err(BacktestError::InvalidCost(self.gross_exposure_scale));
        }
        Ok(())
    }

    pub fn cost(&self, turnover: f64) -> f64 {
        self.one_way_bps * 1e-4 * turnover * self.gross_exposure_scale
    }
}

/// Per-date turnover `0.5 * sum_i |w_t - drift(w_{t-1})|` over both legs.
///
/// Prior weights drift with the return realized between the two formation
/// dates, `w * (1 + r_i) / (1 + R_leg)`, where `R_leg` is the leg's
/// equal-weight return. A missing return is treated as zero. The first date
/// has turnover 0 (initial construction is not charged). Replacing one leg
/// entirely costs 1.0; replacing both costs 2.0.
pub fn turnover(weights: &PortfolioWeights, fwd: &Grid) -> Vec<f64> {
    let n = weights.formation.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(0.0);
    let mut scratch = vec![0.0f64; fwd.n_stocks()];
    for t in 1..n {
        let prev = &weights.positions[t - 1];
        let r = fwd.row(weights.formation[t - 1]);
        let ret = |i: usize| if r[i].is_finite() { r[i] } else { 0.0 };
        let (mut r_long, mut r_short) = (0.0, 0.0);
        for &(i, w) in prev {
            if w > 0.0 {
                r_long += w * ret(i);
            } else {
                r_short += -w * ret(i);
            }
        }
        for &(i, w) in prev {
            let leg = if w > 0.0 { r_long } else { r_short };
            scratch[i] -= w * (1.0 + ret(i)) / (1.0 + leg);
        }
        for &(i, w) in &weights.positions[t] {
            scratch[i] += w;
        }
        let mut total = 0.0;
        for &(i, _) in prev.iter().chain(&weights.positions[t]) {
            total += scratch[i].abs();
            scratch[i] = 0.0;
        }
        out.push(0.5 * total);
    }
    out
}

/// `net_t = gross_t - cost(turnover_t)`.
pub fn apply_costs(gross: &[f64], turnover: &[f64], cost: &CostModel) -> Vec<f64> {
    assert_eq!(gross.len(), turnover.len(), "series are not aligned");
    gross
        .iter()
        .zip(turnover)
        .map(|(g, t)| g - cost.cost(*t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(formation: Vec<usize>, positions: Vec<Vec<(usize, f64)>>) -> PortfolioWeights {
        PortfolioWeights {
            formation,
            positions,
        }
    }

    #[test]
    fn no_trading_no_drift() {
        let pos = vec![(0, 0.5), (1, 0.5), (2, -0.5), (3, -0.5)];
        let w = weights(vec![0, 1], vec![pos.clone(), pos]);
        let fwd = Grid::from_vec(2, 4, vec![0.01, 0.01, -0.02, -0.02, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(turnover(&w, &fwd), vec![0.0, 0.0]);
    }

    #[test]
    fn full_flip_is_two() {
        let w = weights(
            vec![0, 1],
            vec![vec![(0, 1.0), (1, -1.0)], vec![(0, -1.0), (1, 1.0)]],
        );
        let fwd = Grid::from_vec(2, 2, vec![0.03, -0.01, 0.0, 0.0]);
        assert_eq!(turnover(&w, &fwd), vec![0.0, 2.0]);
        // one leg replaced, other kept
        let w = weights(
            vec![0, 1],
            vec![vec![(0, 1.0), (2, -1.0)], vec![(1, 1.0), (2, -1.0)]],
        );
        let fwd = Grid::from_vec(2, 3, vec![0.03, 0.0, -0.01, 0.0, 0.0, 0.0]);
        assert_eq!(turnover(&w, &fwd), vec![0.0, 1.0]);
    }

    #[test]
    fn drift_hand_oracle() {
        // long {0,1}, short {2,3} held for three dates
        let pos = vec![(0, 0.5), (1, 0.5), (2, -0.5), (3, -0.5)];
        let w = weights(vec![0, 1, 2], vec![pos.clone(), pos.clone(), pos]);
        let fwd = Grid::from_vec(
            3,
            4,
            vec![0.10, -0.10, 0.0, 0.20, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        let t = turnover(&w, &fwd);
        // date 1: long leg R = 0, drifted 0.55 / 0.45, |0.5-0.55|+|0.5-0.45| = 0.1
        // short leg R = 0.1, drifted 0.5/1.1 and 0.6/1.1, diffs 0.5-0.4545.. and 0.5454..-0.5
        let short = (0.5 - 0.5 / 1.1f64).abs() + (0.6 / 1.1 - 0.5f64).abs();
        let oracle1 = 0.5 * (0.1 + short);
        // date 2: long leg drifts 0.5*1.05/1.025 and 0.5/1.025
        let r = 0.025f64;
        let oracle2 = 0.5 * ((0.5 - 0.5 * 1.05 / (1.0 + r)).abs() + (0.5 - 0.5 / (1.0 + r)).abs());
        assert!((t[1] - oracle1).abs() < 1e-15);
        assert!((t[2] - oracle2).abs() < 1e-15);
    }

    #[test]
    fn cost_formula() {
        let c = CostModel::default();
        let net = apply_costs(&[0.001, 0.002], &[1.0, 0.0], &c);
        assert!((net[0] - (0.001 - 0.0003)).abs() < 1e-18);
        assert_eq!(net[1], 0.002);
        assert!(CostModel::new(-1.0).is_err());
    }
}
