//! Return-series performance statistics (risk-free rate zero).

use serde::{Deserialize, Serialize};

use crate::stats::{mean, sample_std, TRADING_DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfSummary {
    /// `(prod(1 + r))^(252 / T) - 1`.
    pub ann_return: Option<f64>,
    pub ann_vol: Option<f64>,
    pub sharpe: Option<f64>,
    /// `sqrt(252) * mean / rms(negative returns)`.
    pub sortino: Option<f64>,
    /// Positive fraction, from the compounded equity curve starting at 1.
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    pub n: usize,
}

pub fn perf_summary(returns: &[f64]) -> PerfSummary {
    let n = returns.len();
    let growth: f64 = returns.iter().map(|r| 1.0 + r).product();
    let ann_return = (n > 0 && growth > 0.0)
        .then(|| growth.powf(TRADING_DAYS / n as f64) - 1.0)
        .filter(|v| v.is_finite());
    let m = mean(returns);
    let sd = sample_std(returns);
    let vol_ok = n >= 2 && sd > 0.0 && sd.is_finite();
    let downside: Vec<f64> = returns.iter().copied().filter(|r| *r < 0.0).collect();
    let dd = (downside.iter().map(|r| r * r).sum::<f64>() / downside.len() as f64).sqrt();
    let mdd = max_drawdown(returns);
    PerfSummary {
        ann_return,
        ann_vol: (n >= 2 && sd.is_finite()).then(|| TRADING_DAYS.sqrt() * sd),
        sharpe: vol_ok.then(|| TRADING_DAYS.sqrt() * m / sd),
        sortino: (n >= 2 && !downside.is_empty() && dd > 0.0).then(|| TRADING_DAYS.sqrt() * m / dd),
        max_drawdown: mdd,
        calmar: match ann_return {
            Some(a) if mdd > 0.0 => Some(a / mdd),
            _ => None,
        },
        n,
    }
}

/// Compounded equity curve `[1, (1+r_1), (1+r_1)(1+r_2), ...]`.
pub fn equity_curve(returns: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    let mut e = 1.0;
    out.push(e);
    for r in returns {
        e *= 1.0 + r;
        out.push(e);
    }
    out
}

/// Largest peak-to-trough loss `1 - trough / peak` of an equity path.
pub fn max_drawdown_equity(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        // `1 - e / peak` is monotone in `peak` under IEEE rounding, so the
        // running peak attains the all-pairs maximum exactly.
        let dd = 1.0 - e / peak;
        if dd > worst {
            worst = dd;
        }
    }
    worst
}

pub fn max_drawdown(returns: &[f64]) -> f64 {
    max_drawdown_equity(&equity_curve(returns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawdown_hand() {
        assert_eq!(max_drawdown_equity(&[100.0, 50.0, 75.0]), 0.5);
        assert_eq!(max_drawdown_equity(&[1.0, 1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn sharpe_formula() {
        // alternating 0.011 / -0.009: mean 0.001, sample sd slightly above 0.01
        let r: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 0.011 } else { -0.009 }).collect();
        let s = perf_summary(&r);
        let sd = sample_std(&r);
        assert!((s.sharpe.unwrap() - 252f64.sqrt() * 0.001 / sd).abs() < 1e-12);
        assert!((252f64.sqrt() * 0.1 - 1.5875).abs() < 1e-4);
    }

    #[test]
    fn undefined_sentinels() {
        let s = perf_summary(&[0.0; 10]);
        assert_eq!(s.sharpe, None);
        assert_eq!(s.calmar, None);
        assert_eq!(s.max_drawdown, 0.0);
        assert_eq!(s.ann_return, Some(0.0));
    }

    #[test]
    fn sortino_uses_negative_returns() {
        let r = [0.02, -0.01, 0.03, -0.03];
        let s = perf_summary(&r);
        let dd = ((0.01f64.powi(2) + 0.03f64.powi(2)) / 2.0).sqrt();
        assert!((s.sortino.unwrap() - 252f64.sqrt() * 0.0025 / dd).abs() < 1e-12);
    }

    #[test]
    fn annual_return_compounds() {
        let r = vec![0.001; 252];
        let s = perf_summary(&r);
        assert!((s.ann_return.unwrap() - (1.001f64.powi(252) - 1.0)).abs() < 1e-12);
    }
}
