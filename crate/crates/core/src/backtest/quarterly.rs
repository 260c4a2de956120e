//! Calendar-quarter breakdown of a dated return series.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::metrics::perf_summary;
use crate::stats::mean;

/// A quarter whose first (last) observation lies more than this many
/// calendar days after its start (before its end) is labeled partial.
const PARTIAL_SLACK_DAYS: i64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterRow {
    /// `2021Q1`.
    pub label: String,
    pub partial: bool,
    pub first: NaiveDate,
    pub last: NaiveDate,
    pub n: usize,
    /// Compounded return over the quarter.
    pub period_return: f64,
    pub ann_return: Option<f64>,
    pub ann_vol: Option<f64>,
    pub sharpe: Option<f64>,
    /// Positive fraction.
    pub max_drawdown: f64,
    pub avg_turnover: Option<f64>,
    pub net_period_return: Option<f64>,
    pub net_sharpe: Option<f64>,
}

fn quarter_of(d: NaiveDate) -> (i32, u32) {
    (d.year(), (d.month0() / 3) + 1)
}

fn quarter_bounds(year: i32, q: u32) -> (NaiveDate, NaiveDate) {
    let start = NaiveDate::from_ymd_opt(year, 3 * (q - 1) + 1, 1).expect("valid quarter");
    let next = if q == 4 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, 3 * q + 1, 1)
    }
    .expect("valid quarter");
    (start, next.pred_opt().expect("date after epoch"))
}

fn compound(r: &[f64]) -> f64 {
    r.iter().map(|x| 1.0 + x).product::<f64>() - 1.0
}

/// Groups `gross` (and optionally `turnover` / `net`) by the calendar quarter
/// of `dates`, which must be sorted. Every observation falls in exactly one row.
pub fn quarterly_table(
    dates: &[NaiveDate],
    gross: &[f64],
    turnover: Option<&[f64]>,
    net: Option<&[f64]>,
) -> Vec<QuarterRow> {
    assert_eq!(dates.len(), gross.len());
    let mut rows = Vec::new();
    let mut start = 0;
    while start < dates.len() {
        let key = quarter_of(dates[start]);
        let mut end = start;
        while end < dates.len() && quarter_of(dates[end]) == key {
            end += 1;
        }
        let g = &gross[start..end];
        let perf = perf_summary(g);
        let (qs, qe) = quarter_bounds(key.0, key.1);
        let (first, last) = (dates[start], dates[end - 1]);
        let partial = (first - qs).num_days() > PARTIAL_SLACK_DAYS
            || (qe - last).num_days() > PARTIAL_SLACK_DAYS;
        let net_slice = net.map(|n| &n[start..end]);
        rows.push(QuarterRow {
            label: format!("{}Q{}", key.0, key.1),
            partial,
            first,
            last,
            n: end - start,
            period_return: compound(g),
            ann_return: perf.ann_return,
            ann_vol: perf.ann_vol,
            sharpe: perf.sharpe,
            max_drawdown: perf.max_drawdown,
            avg_turnover: turnover.map(|t| mean(&t[start..end])),
            net_period_return: net_slice.map(compound),
            net_sharpe: net_slice.and_then(|n| perf_summary(n).sharpe),
        });
        start = end;
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weekdays(from: NaiveDate, n: usize) -> Vec<NaiveDate> {
        from.iter_days()
            .filter(|d| d.weekday().number_from_monday() <= 5)
            .take(n)
            .collect()
    }

    #[test]
    fn compounding_oracle() {
        let d = weekdays(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 63);
        let rows = quarterly_table(&d, &[0.001; 63], None, None);
        assert_eq!(rows.len(), 1);
        assert!((rows[0].period_return - (1.001f64.powi(63) - 1.0)).abs() < 1e-14);
        assert!((rows[0].period_return - 0.0650).abs() < 5e-5);
    }

    #[test]
    fn zero_returns() {
        let d = weekdays(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 20);
        let rows = quarterly_table(&d, &[0.0; 20], Some(&[0.0; 20]), Some(&[0.0; 20]));
        assert_eq!(rows[0].period_return, 0.0);
        assert_eq!(rows[0].sharpe, None);
        assert_eq!(rows[0].net_sharpe, None);
        assert!(rows[0].partial);
    }

    #[test]
    fn partition_covers_all_dates() {
        let d = weekdays(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 140);
        let r: Vec<f64> = (0..140).map(|i| ((i * 37 % 17) as f64 - 8.0) * 1e-3).collect();
        let rows = quarterly_table(&d, &r, None, None);
        assert_eq!(rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(), ["2021Q1", "2021Q2", "2021Q3"]);
        assert_eq!(rows.iter().map(|r| r.n).sum::<usize>(), 140);
        let lhs: f64 = rows.iter().map(|r| r.period_return.ln_1p()).sum();
        assert!((lhs - compound(&r).ln_1p()).abs() < 1e-10);
        assert!(!rows[0].partial);
        assert!(rows[2].partial);
    }
}
