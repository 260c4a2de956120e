//! Score-sorted portfolio backtests.
//!
//! Scores formed on date `d` are sorted into `q` equal-weight buckets and
//! held over the return realized on `d + 1`. The long-short series is the top
//! bucket minus the bottom bucket, rebalanced daily. [`BacktestReport`] adds
//! turnover, linear costs and a quarterly breakdown.

mod horizon;
mod quarterly;
mod turnover;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;
use crate::metrics::{
    bucket_means, equity_curve, perf_summary, quantile_sort, tradable_scores, PerfSummary,
    QuantileAssignment,
};
use crate::stats::{mean, spearman};

pub use horizon::{horizon_series, multi_horizon, HorizonStat};
pub use quarterly::{quarterly_table, QuarterRow};
pub use turnover::{apply_costs, turnover, CostModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacktestError {
    #[error("invalid cost parameter {0}")]
    InvalidCost(f64),
    #[error("need at least 2 quantiles, got {0}")]
    InvalidQuantiles(usize),
}

/// Signed equal weights per formation date: each long name `+1/n_long`, each
/// short name `-1/n_short`. Positions are sorted by stock index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PortfolioWeights {
    pub formation: Vec<usize>,
    pub positions: Vec<Vec<(usize, f64)>>,
}

impl PortfolioWeights {
    pub fn long_sum(&self, t: usize) -> f64 {
        self.positions[t].iter().filter(|p| p.1 > 0.0).map(|p| p.1).sum()
    }

    pub fn short_sum(&self, t: usize) -> f64 {
        self.positions[t].iter().filter(|p| p.1 < 0.0).map(|p| p.1).sum()
    }

    pub fn gross_exposure(&self, t: usize) -> f64 {
        self.positions[t].iter().map(|p| p.1.abs()).sum()
    }
}

/// Gross decile returns of a score grid.
#[derive(Debug, Clone)]
pub struct DecileBacktest {
    pub q: usize,
    /// Requested formation dates, in order.
    pub dates: Vec<usize>,
    /// Bucket assignment per requested date; `None` when fewer than `q`
    /// names were tradable (the date is skipped, not filled).
    pub assignments: Vec<Option<QuantileAssignment>>,
    /// Formation dates that produced a portfolio.
    pub formation: Vec<usize>,
    /// `deciles[t][b]`: equal-weight return of bucket `b + 1`.
    pub deciles: Vec<Vec<f64>>,
    /// Top minus bottom bucket.
    pub spread: Vec<f64>,
    pub weights: PortfolioWeights,
    pub skipped: Vec<usize>,
}

fn leg_weights(a: &QuantileAssignment) -> Vec<(usize, f64)> {
    let top = a.q as u16;
    let (n_long, n_short) = (a.size(top) as f64, a.size(1) as f64);
    a.buckets
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| match b {
            _ if b == top => Some((i, 1.0 / n_long)),
            1 => Some((i, -1.0 / n_short)),
            _ => None,
        })
        .collect()
}

/// Sorts `scores` on each of `dates` and records bucket returns from `fwd`.
pub fn decile_backtest(
    scores: &Grid,
    fwd: &Grid,
    dates: &[usize],
    q: usize,
) -> Result<DecileBacktest, BacktestError> {
    if q < 2 {
        return Err(BacktestError::InvalidQuantiles(q));
    }
    let assignments: Vec<Option<QuantileAssignment>> = dates
        .par_iter()
        .map(|&d| quantile_sort(&tradable_scores(scores.row(d), fwd.row(d)), q))
        .collect();
    let mut bt = DecileBacktest {
        q,
        dates: dates.to_vec(),
        assignments,
        formation: Vec::new(),
        deciles: Vec::new(),
        spread: Vec::new(),
        weights: PortfolioWeights::default(),
        skipped: Vec::new(),
    };
    for (&d, a) in dates.iter().zip(&bt.assignments) {
        let Some(a) = a else {
            bt.skipped.push(d);
            continue;
        };
        let means: Vec<f64> = bucket_means(a, fwd.row(d))
            .into_iter()
            .map(|m| m.expect("tradable names have returns"))
            .collect();
        bt.spread.push(means[q - 1] - means[0]);
        bt.deciles.push(means);
        bt.formation.push(d);
        bt.weights.formation.push(d);
        bt.weights.positions.push(leg_weights(a));
    }
    Ok(bt)
}

impl DecileBacktest {
    /// Return series of bucket `b` (1-based).
    pub fn bucket_series(&self, b: usize) -> Vec<f64> {
        self.deciles.iter().map(|row| row[b - 1]).collect()
    }

    /// Spearman correlation between bucket index and mean bucket return.
    pub fn monotonicity(&self) -> Option<f64> {
        let idx: Vec<f64> = (1..=self.q).map(|b| b as f64).collect();
        let means: Vec<f64> = (1..=self.q).map(|b| mean(&self.bucket_series(b))).collect();
        if means.iter().any(|m| !m.is_finite()) {
            return None;
        }
        spearman(&idx, &means)
    }
}

/// Compounded return of a daily series.
pub fn period_return(r: &[f64]) -> f64 {
    equity_curve(r).last().copied().unwrap_or(1.0) - 1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub name: String,
    pub period_return: f64,
    pub perf: PerfSummary,
}

impl SeriesSummary {
    pub fn new(name: impl Into<String>, r: &[f64]) -> Self {
        Self {
            name: name.into(),
            period_return: period_return(r),
            perf: perf_summary(r),
        }
    }
}

/// Gross, turnover and net series with their summaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub q: usize,
    /// Realization date of each return (the day after formation).
    pub dates: Vec<NaiveDate>,
    /// `deciles[b]` is the series of bucket `b + 1`.
    pub deciles: Vec<Vec<f64>>,
    pub gross: Vec<f64>,
    pub turnover: Vec<f64>,
    pub net: Vec<f64>,
    pub decile_summaries: Vec<SeriesSummary>,
    pub gross_summary: SeriesSummary,
    pub net_summary: SeriesSummary,
    pub monotonicity: Option<f64>,
    pub quarterly: Vec<QuarterRow>,
    pub skipped: Vec<NaiveDate>,
    pub cost: CostModel,
}

impl BacktestReport {
    /// `calendar` is the panel's date vector.
    pub fn build(bt: &DecileBacktest, fwd: &Grid, calendar: &[NaiveDate], cost: CostModel) -> Self {
        let dates: Vec<NaiveDate> = bt.formation.iter().map(|&d| calendar[d + 1]).collect();
        let deciles: Vec<Vec<f64>> = (1..=bt.q).map(|b| bt.bucket_series(b)).collect();
        let to = turnover(&bt.weights, fwd);
        let net = apply_costs(&bt.spread, &to, &cost);
        let quarterly = quarterly_table(&dates, &bt.spread, Some(&to), Some(&net));
        BacktestReport {
            q: bt.q,
            decile_summaries: deciles
                .iter()
                .enumerate()
                .map(|(b, s)| SeriesSummary::new(format!("D{}", b + 1), s))
                .collect(),
            gross_summary: SeriesSummary::new("Gross", &bt.spread),
            net_summary: SeriesSummary::new("Net", &net),
            monotonicity: bt.monotonicity(),
            skipped: bt.skipped.iter().map(|&d| calendar[d]).collect(),
            dates,
            deciles,
            gross: bt.spread.clone(),
            turnover: to,
            net,
            quarterly,
            cost,
        }
    }

    /// Long-only series: the top bucket.
    pub fn long_only(&self) -> &[f64] {
        &self.deciles[self.q - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_grid(rng: &mut ChaCha8Rng, nd: usize, ns: usize, scale: f64) -> Grid {
        Grid::from_vec(
            nd,
            ns,
            (0..nd * ns).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect(),
        )
    }

    #[test]
    fn perfect_foresight_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fwd = random_grid(&mut rng, 30, 100, 0.02);
        let dates: Vec<usize> = (0..30).collect();
        let bt = decile_backtest(&fwd, &fwd, &dates, 10).unwrap();
        for row in &bt.deciles {
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(bt.monotonicity(), Some(1.0));
    }

    #[test]
    fn weights_sum_to_one_per_leg() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_grid(&mut rng, 5, 47, 1.0);
        let fwd = random_grid(&mut rng, 5, 47, 0.01);
        let bt = decile_backtest(&s, &fwd, &[0, 1, 2, 3], 10).unwrap();
        for t in 0..4 {
            assert!((bt.weights.long_sum(t) - 1.0).abs() < 1e-12);
            assert!((bt.weights.short_sum(t) + 1.0).abs() < 1e-12);
            assert!((bt.weights.gross_exposure(t) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn thin_dates_are_skipped() {
        let mut s = Grid::filled(3, 12, 1.0);
        for i in 0..12 {
            s.set(0, i, i as f64);
            s.set(2, i, -(i as f64));
        }
        s.row_mut(1)[3..].fill(f64::NAN);
        let fwd = Grid::filled(3, 12, 0.01);
        let bt = decile_backtest(&s, &fwd, &[0, 1, 2], 10).unwrap();
        assert_eq!(bt.skipped, vec![1]);
        assert_eq!(bt.formation, vec![0, 2]);
        assert!(bt.assignments[1].is_none());
    }

    #[test]
    fn h1_equals_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_grid(&mut rng, 40, 50, 1.0);
        let fwd = random_grid(&mut rng, 40, 50, 0.01);
        let dates: Vec<usize> = (0..39).collect();
        let bt = decile_backtest(&s, &fwd, &dates, 10).unwrap();
        let h1: Vec<f64> = horizon_series(&bt.assignments, &bt.dates, &fwd, 1)
            .into_iter()
            .map(Option::unwrap)
            .collect();
        assert_eq!(h1, bt.spread);
        let h3 = horizon_series(&bt.assignments, &bt.dates, &fwd, 3);
        assert!(h3[0].is_none() && h3[1].is_none() && h3[2].is_some());
    }

    #[test]
    fn net_equals_gross_minus_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_grid(&mut rng, 60, 40, 1.0);
        let fwd = random_grid(&mut rng, 61, 40, 0.01);
        let calendar: Vec<NaiveDate> = NaiveDate::from_ymd_opt(2021, 1, 4)
            .unwrap()
            .iter_days()
            .take(61)
            .collect();
        let dates: Vec<usize> = (0..60).collect();
        let bt = decile_backtest(&s, &fwd, &dates, 10).unwrap();
        let rep = BacktestReport::build(&bt, &fwd, &calendar, CostModel::default());
        for t in 0..rep.gross.len() {
            assert_eq!(rep.net[t], rep.gross[t] - 3.0 * 1e-4 * rep.turnover[t]);
        }
        assert_eq!(rep.dates[0], calendar[1]);
        assert_eq!(rep.quarterly.iter().map(|q| q.n).sum::<usize>(), 60);
    }
}
