//! The unified evaluation protocol.
//!
//! Every candidate factor is scored by the same [`Evaluator`]: per-date
//! winsorize-then-z-score normalization, rank IC against next-day returns,
//! and a top-minus-bottom quantile spread. The evaluator carries a hash of its
//! configuration so that metrics from different protocols cannot be mixed.

mod ic;
mod perf;
mod quantile;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::grid::Grid;
use crate::panel::{clip, winsorize_bounds, zscore_cross_section, Panel};

pub use ic::{ic_tstat, long_only_ic, rank_ic, IcStats};
pub use perf::{equity_curve, max_drawdown, max_drawdown_equity, perf_summary, PerfSummary};
pub use quantile::{
    bucket_means, long_short_return, quantile_sort, tradable_scores, QuantileAssignment,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Minimum names with finite score and return for a date's IC to count.
    pub min_names: usize,
    /// Number of quantile buckets for the long-short spread.
    pub quantiles: usize,
    /// Top fraction of names used by the long-only IC.
    pub leg_fraction: f64,
    pub winsor_low: f64,
    pub winsor_high: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            min_names: 10,
            quantiles: 10,
            leg_fraction: 0.5,
            winsor_low: 0.01,
            winsor_high: 0.99,
        }
    }
}

impl EvalConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn protocol_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Per-factor evaluation vector. Statistics that are undefined on the sample
/// (zero dispersion, too few dates) are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub mean_ic: Option<f64>,
    pub ic_tstat: Option<f64>,
    pub icir: Option<f64>,
    pub icl: Option<f64>,
    pub iclir: Option<f64>,
    pub ann_return: Option<f64>,
    pub ann_vol: Option<f64>,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub calmar: Option<f64>,
    pub max_drawdown: Option<f64>,
    /// Formation dates in the evaluation window.
    pub n_days: usize,
    /// Dates with a defined IC.
    pub n_valid_dates: usize,
    /// Mean number of names with finite score and return per date.
    pub avg_coverage: f64,
    pub config_hash: String,
    /// First formation date.
    pub window_start: Option<NaiveDate>,
    /// Last date whose realized return enters the metrics.
    pub window_end: Option<NaiveDate>,
}

/// Metrics plus the per-date series they were computed from.
#[derive(Debug, Clone)]
pub struct EvalDetail {
    pub metrics: EvalMetrics,
    /// Formation date indices of the window.
    pub dates: Vec<usize>,
    pub ic: Vec<Option<f64>>,
    pub long_short: Vec<Option<f64>>,
}

/// Applies the protocol normalization to every date of `scores`.
pub fn normalize_scores(scores: &Grid, cfg: &EvalConfig) -> Grid {
    scores.map_rows(|_, row| match winsorize_bounds(row, cfg.winsor_low, cfg.winsor_high) {
        Some((lo, hi)) => zscore_cross_section(&clip(row, lo, hi)).values,
        None => row.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct Evaluator {
    cfg: EvalConfig,
    hash: String,
    fwd: Grid,
    dates: Vec<NaiveDate>,
    window: Vec<usize>,
}

impl Evaluator {
    /// Evaluates on formation dates `d` with `start <= date[d]` and
    /// `date[d + 1] <= end`, so no realized return after `end` is read.
    pub fn new(panel: &Panel, cfg: EvalConfig, start: NaiveDate, end: NaiveDate) -> Evaluator {
        let dates = panel.dates().to_vec();
        let window = (0..dates.len().saturating_sub(1))
            .filter(|&d| dates[d] >= start && dates[d + 1] <= end)
            .collect();
        Evaluator {
            hash: cfg.protocol_hash(),
            cfg,
            fwd: panel.forward_returns(),
            dates,
            window,
        }
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    pub fn forward_returns(&self) -> &Grid {
        &self.fwd
    }

    /// Normalizes `raw` and evaluates it.
    pub fn evaluate(&self, raw: &Grid) -> EvalMetrics {
        self.evaluate_detailed(raw).metrics
    }

    pub fn evaluate_detailed(&self, raw: &Grid) -> EvalDetail {
        let scores = normalize_scores(raw, &self.cfg);
        self.evaluate_normalized(&scores)
    }

    /// Evaluates scores that are already normalized (or whose scale is irrelevant).
    pub fn evaluate_normalized(&self, scores: &Grid) -> EvalDetail {
        let cfg = &self.cfg;
        let per_date: Vec<(Option<f64>, Option<f64>, Option<f64>, usize)> = self
            .window
            .par_iter()
            .map(|&d| {
                let s = scores.row(d);
                let r = self.fwd.row(d);
                let ic = rank_ic(s, r, cfg.min_names);
                let icl = long_only_ic(s, r, cfg.leg_fraction, cfg.min_names);
                let tradable = tradable_scores(s, r);
                let cov = tradable.iter().filter(|v| v.is_finite()).count();
                let ls = quantile_sort(&tradable, cfg.quantiles)
                    .and_then(|a| long_short_return(&a, r));
                (ic, icl, ls, cov)
            })
            .collect();

        let ics: Vec<f64> = per_date.iter().filter_map(|p| p.0).collect();
        let icls: Vec<f64> = per_date.iter().filter_map(|p| p.1).collect();
        let ls: Vec<f64> = per_date.iter().filter_map(|p| p.2).collect();
        let ic_stats = ic_tstat(&ics);
        let icl_stats = ic_tstat(&icls);
        let perf = perf_summary(&ls);
        let n_days = self.window.len();
        let avg_coverage = if n_days == 0 {
            0.0
        } else {
            per_date.iter().map(|p| p.3 as f64).sum::<f64>() / n_days as f64
        };
        let metrics = EvalMetrics {
            mean_ic: ic_stats.mean,
            ic_tstat: ic_stats.t,
            icir: ic_stats.icir,
            icl: icl_stats.mean,
            iclir: icl_stats.icir,
            ann_return: perf.ann_return,
            ann_vol: perf.ann_vol,
            sharpe: perf.sharpe,
            sortino: perf.sortino,
            calmar: perf.calmar,
            max_drawdown: (!ls.is_empty()).then_some(perf.max_drawdown),
            n_days,
            n_valid_dates: ics.len(),
            avg_coverage,
            config_hash: self.hash.clone(),
            window_start: self.window.first().map(|&d| self.dates[d]),
            window_end: self.window.last().map(|&d| self.dates[d + 1]),
        };
        EvalDetail {
            metrics,
            dates: self.window.clone(),
            ic: per_date.iter().map(|p| p.0).collect(),
            long_short: per_date.iter().map(|p| p.2).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::RawObservation;

    fn panel(n_days: usize, n_stocks: usize) -> Panel {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let mut rows = Vec::new();
        for d in 0..n_days {
            for s in 0..n_stocks {
                rows.push(RawObservation {
                    date: start + chrono::Days::new(d as u64),
                    stock_id: format!("S{s:03}"),
                    ret: (((d * 31 + s * 17) % 23) as f64 - 11.0) * 0.001,
                    price: 10.0,
                    volume: 1.0,
                    exchange_code: 1,
                    share_code: 10,
                    market_ret_vw: 0.0,
                    market_ret_sp: 0.0,
                    bid: None,
                    ask: None,
                });
            }
        }
        Panel::from_observations(rows).unwrap()
    }

    #[test]
    fn window_respects_end_date() {
        let p = panel(30, 20);
        let d = p.dates().to_vec();
        let ev = Evaluator::new(&p, EvalConfig::default(), d[0], d[19]);
        assert_eq!(ev.window().len(), 19);
        let m = ev.evaluate(&p.forward_returns());
        assert_eq!(m.window_end, Some(d[19]));
    }

    #[test]
    fn perfect_foresight_scores() {
        let p = panel(40, 30);
        let d = p.dates().to_vec();
        let ev = Evaluator::new(&p, EvalConfig::default(), d[0], d[39]);
        let m = ev.evaluate_normalized(&p.forward_returns()).metrics;
        assert!((m.mean_ic.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.n_valid_dates, 39);
        assert!(m.sharpe.unwrap() > 0.0);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = EvalConfig::default();
        let b = EvalConfig {
            quantiles: 5,
            ..EvalConfig::default()
        };
        assert_eq!(a.protocol_hash(), EvalConfig::default().protocol_hash());
        assert_ne!(a.protocol_hash(), b.protocol_hash());
    }
}
