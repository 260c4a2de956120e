//! Columnar stock-date panel.
//!
//! A [`Panel`] is built once from [`RawObservation`]s and is immutable
//! afterwards. Dates and stock ids are sorted; every column is a dense
//! date-major [`Grid`] with `NaN` for absent cells. Each stock keeps the list
//! of dates on which it was observed, which is the "history" that time-series
//! operators walk.

mod cross_section;
mod ingest;
mod primitives;
mod screen;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Grid;

pub use cross_section::{
    clip, cs_normalize, winsorize_bounds, winsorize_cross_section, zscore_cross_section, ZScored,
};
pub use ingest::{ingest_panel, write_panel_csv, ColumnMapping, IngestReport, RejectedRow};
pub use primitives::{build_primitives, PRIMITIVES, PRIMITIVE_WINDOW};
pub use screen::{apply_screens, ScreenConfig, ScreenReport, ScreenRow};

pub const COL_RET: &str = "ret";
pub const COL_PRICE: &str = "price";
pub const COL_VOLUME: &str = "volume";
pub const COL_BID: &str = "bid";
pub const COL_ASK: &str = "ask";
pub const COL_MKT_VW: &str = "market_ret_vw";
pub const COL_MKT_SP: &str = "market_ret_sp";

const RAW_COLUMNS: [&str; 7] = [
    COL_RET,
    COL_PRICE,
    COL_VOLUME,
    COL_BID,
    COL_ASK,
    COL_MKT_VW,
    COL_MKT_SP,
];

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing required column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("duplicate observation for date {date} and stock {stock}")]
    DuplicateKey { date: NaiveDate, stock: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid screen config: {0}")]
    InvalidScreen(String),
    #[error("invalid winsorization bounds ({low}, {high})")]
    InvalidQuantiles { low: f64, high: f64 },
}

/// One stock-date record as delivered by the data vendor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawObservation {
    pub date: NaiveDate,
    pub stock_id: String,
    /// Simple return over (t-1, t], decimal.
    pub ret: f64,
    /// Close price. Vendors code bid/ask midpoints as negative prices; the
    /// panel stores the absolute value.
    pub price: f64,
    pub volume: f64,
    pub exchange_code: i32,
    pub share_code: i32,
    pub market_ret_vw: f64,
    pub market_ret_sp: f64,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    dates: Vec<NaiveDate>,
    stocks: Vec<String>,
    present: Vec<bool>,
    exchange: Vec<i32>,
    share: Vec<i32>,
    columns: BTreeMap<String, Grid>,
    histories: Vec<Vec<u32>>,
}

impl Panel {
    /// Builds a panel; fails on a repeated `(date, stock)` key.
    pub fn from_observations(mut obs: Vec<RawObservation>) -> Result<Panel, PanelError> {
        obs.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.stock_id.cmp(&b.stock_id)));
        for w in obs.windows(2) {
            if w[0].date == w[1].date && w[0].stock_id == w[1].stock_id {
                return Err(PanelError::DuplicateKey {
                    date: w[0].date,
                    stock: w[0].stock_id.clone(),
                });
            }
        }
        let mut dates: Vec<NaiveDate> = obs.iter().map(|o| o.date).collect();
        dates.dedup();
        let mut stocks: Vec<String> = obs.iter().map(|o| o.stock_id.clone()).collect();
        stocks.sort();
        stocks.dedup();
        let stock_index: BTreeMap<&str, usize> = stocks
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();

        let (nd, ns) = (dates.len(), stocks.len());
        let mut present = vec![false; nd * ns];
        let mut exchange = vec![0; nd * ns];
        let mut share = vec![0; nd * ns];
        let mut cols: Vec<Grid> = RAW_COLUMNS.iter().map(|_| Grid::missing(nd, ns)).collect();

        let mut d = 0;
        for o in &obs {
            while dates[d] != o.date {
                d += 1;
            }
            let s = stock_index[o.stock_id.as_str()];
            let k = d * ns + s;
            present[k] = true;
            exchange[k] = o.exchange_code;
            share[k] = o.share_code;
            cols[0].set(d, s, o.ret);
            cols[1].set(d, s, o.price.abs());
            cols[2].set(d, s, o.volume);
            cols[3].set(d, s, o.bid.unwrap_or(f64::NAN));
            cols[4].set(d, s, o.ask.unwrap_or(f64::NAN));
            cols[5].set(d, s, o.market_ret_vw);
            cols[6].set(d, s, o.market_ret_sp);
        }
        let columns = RAW_COLUMNS
            .iter()
            .map(|c| c.to_string())
            .zip(cols)
            .collect();
        let histories = build_histories(&present, nd, ns);
        Ok(Panel {
            dates,
            stocks,
            present,
            exchange,
            share,
            columns,
            histories,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn stock_ids(&self) -> &[String] {
        &self.stocks
    }

    pub fn n_observations(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    #[inline]
    pub fn is_present(&self, date: usize, stock: usize) -> bool {
        self.present[date * self.stocks.len() + stock]
    }

    pub fn exchange_code(&self, date: usize, stock: usize) -> i32 {
        self.exchange[date * self.stocks.len() + stock]
    }

    pub fn share_code(&self, date: usize, stock: usize) -> i32 {
        self.share[date * self.stocks.len() + stock]
    }

    /// Date indices on which `stock` was observed, ascending.
    pub fn history(&self, stock: usize) -> &[u32] {
        &self.histories[stock]
    }

    pub fn column(&self, name: &str) -> Option<&Grid> {
        self.columns.get(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    /// Adds or replaces a column. Cells where the stock is absent are forced to `NaN`.
    pub fn insert_column(&mut self, name: impl Into<String>, mut grid: Grid) {
        assert_eq!(grid.n_dates(), self.n_dates());
        assert_eq!(grid.n_stocks(), self.n_stocks());
        for (k, v) in grid.as_mut_slice().iter_mut().enumerate() {
            if !self.present[k] {
                *v = f64::NAN;
            }
        }
        self.columns.insert(name.into(), grid);
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Index of the last panel date `<= date`.
    pub fn index_at_or_before(&self, date: NaiveDate) -> Option<usize> {
        match self.dates.binary_search(&date) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }

    /// Index of the first panel date `>= date`.
    pub fn index_at_or_after(&self, date: NaiveDate) -> Option<usize> {
        match self.dates.binary_search(&date) {
            Ok(i) => Some(i),
            Err(i) if i < self.dates.len() => Some(i),
            Err(_) => None,
        }
    }

    /// Return over `(t, t+1]` aligned at row `t`: the `ret` of the next panel
    /// date when the stock is observed there, otherwise missing.
    pub fn forward_returns(&self) -> Grid {
        let ret = &self.columns[COL_RET];
        let (nd, ns) = (self.n_dates(), self.n_stocks());
        let mut out = Grid::missing(nd, ns);
        for d in 0..nd.saturating_sub(1) {
            out.row_mut(d).copy_from_slice(ret.row(d + 1));
        }
        out
    }

    /// Per-date value of a market-level column, read from the first observed
    /// stock on each date.
    pub fn market_series(&self, name: &str) -> Vec<f64> {
        let col = &self.columns[name];
        (0..self.n_dates())
            .map(|d| {
                (0..self.n_stocks())
                    .find(|&s| self.is_present(d, s))
                    .map(|s| col.get(d, s))
                    .unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// Panel restricted to dates `0..=last`. Stocks are kept even if they have
    /// no observation left, so stock indices stay aligned with the parent.
    pub fn truncate_to(&self, last: usize) -> Panel {
        let nd = (last + 1).min(self.n_dates());
        let ns = self.n_stocks();
        let present = self.present[..nd * ns].to_vec();
        let histories = build_histories(&present, nd, ns);
        Panel {
            dates: self.dates[..nd].to_vec(),
            stocks: self.stocks.clone(),
            present,
            exchange: self.exchange[..nd * ns].to_vec(),
            share: self.share[..nd * ns].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|(k, g)| (k.clone(), g.truncated(nd)))
                .collect(),
            histories,
        }
    }

    /// Keeps observations where `keep[d * n_stocks + s]` is true and drops
    /// dates and stocks left without any observation.
    pub fn retain_rows(&self, keep: &[bool]) -> Panel {
        let (nd, ns) = (self.n_dates(), self.n_stocks());
        assert_eq!(keep.len(), nd * ns);
        let live = |k: usize| keep[k] && self.present[k];
        let date_keep: Vec<usize> = (0..nd)
            .filter(|&d| (0..ns).any(|s| live(d * ns + s)))
            .collect();
        let stock_keep: Vec<usize> = (0..ns)
            .filter(|&s| (0..nd).any(|d| live(d * ns + s)))
            .collect();
        let (nd2, ns2) = (date_keep.len(), stock_keep.len());
        let mut present = vec![false; nd2 * ns2];
        let mut exchange = vec![0; nd2 * ns2];
        let mut share = vec![0; nd2 * ns2];
        let mut columns: BTreeMap<String, Grid> = self
            .columns
            .keys()
            .map(|k| (k.clone(), Grid::missing(nd2, ns2)))
            .collect();
        for (i, &d) in date_keep.iter().enumerate() {
            for (j, &s) in stock_keep.iter().enumerate() {
                let k = d * ns + s;
                if !live(k) {
                    continue;
                }
                let k2 = i * ns2 + j;
                present[k2] = true;
                exchange[k2] = self.exchange[k];
                share[k2] = self.share[k];
                for (name, g) in columns.iter_mut() {
                    g.set(i, j, self.columns[name].get(d, s));
                }
            }
        }
        let histories = build_histories(&present, nd2, ns2);
        Panel {
            dates: date_keep.iter().map(|&d| self.dates[d]).collect(),
            stocks: stock_keep.iter().map(|&s| self.stocks[s].clone()).collect(),
            present,
            exchange,
            share,
            columns,
            histories,
        }
    }

    /// Raw observations, ordered by date then stock.
    pub fn to_observations(&self) -> Vec<RawObservation> {
        let opt = |v: f64| if v.is_finite() { Some(v) } else { None };
        let mut out = Vec::with_capacity(self.n_observations());
        for d in 0..self.n_dates() {
            for s in 0..self.n_stocks() {
                if !self.is_present(d, s) {
                    continue;
                }
                let c = |name: &str| self.columns[name].get(d, s);
                out.push(RawObservation {
                    date: self.dates[d],
                    stock_id: self.stocks[s].clone(),
                    ret: c(COL_RET),
                    price: c(COL_PRICE),
                    volume: c(COL_VOLUME),
                    exchange_code: self.exchange_code(d, s),
                    share_code: self.share_code(d, s),
                    market_ret_vw: c(COL_MKT_VW),
                    market_ret_sp: c(COL_MKT_SP),
                    bid: opt(c(COL_BID)),
                    ask: opt(c(COL_ASK)),
                });
            }
        }
        out
    }

    /// Structural equality of two panels, bit-exact on every column.
    pub fn structurally_equal(&self, other: &Panel) -> bool {
        self.dates == other.dates
            && self.stocks == other.stocks
            && self.present == other.present
            && self.exchange == other.exchange
            && self.share == other.share
            && self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .all(|(k, g)| other.columns.get(k).is_some_and(|h| g.bit_identical(h)))
    }

    /// Mutable access for fixtures and perturbation tests.
    pub fn column_mut(&mut self, name: &str) -> Option<&mut Grid> {
        self.columns.get_mut(name)
    }
}

fn build_histories(present: &[bool], nd: usize, ns: usize) -> Vec<Vec<u32>> {
    let mut h = vec![Vec::new(); ns];
    for d in 0..nd {
        for (s, hist) in h.iter_mut().enumerate() {
            if present[d * ns + s] {
                hist.push(d as u32);
            }
        }
    }
    h
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn duplicate_key_names_pair() {
        let err = Panel::from_observations(vec![
            obs("2020-01-02", "A", 0.0, 10.0, 1.0),
            obs("2020-01-02", "A", 0.1, 10.0, 1.0),
        ])
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2020-01-02") && msg.contains('A'), "{msg}");
    }

    #[test]
    fn forward_returns_align_next_date() {
        let p = Panel::from_observations(vec![
            obs(&day(0), "A", 0.01, 10.0, 1.0),
            obs(&day(1), "A", 0.02, 10.0, 1.0),
            obs(&day(2), "A", 0.03, 10.0, 1.0),
        ])
        .unwrap();
        let f = p.forward_returns();
        assert_eq!(f.get(0, 0), 0.02);
        assert_eq!(f.get(1, 0), 0.03);
        assert!(f.get(2, 0).is_nan());
    }

    #[test]
    fn negative_prices_stored_absolute() {
        let p = Panel::from_observations(vec![obs(&day(0), "A", 0.0, -7.5, 1.0)]).unwrap();
        assert_eq!(p.column(COL_PRICE).unwrap().get(0, 0), 7.5);
    }

    #[test]
    fn retain_rows_drops_empty_dates_and_stocks() {
        let p = Panel::from_observations(vec![
            obs(&day(0), "A", 0.0, 10.0, 1.0),
            obs(&day(0), "B", 0.0, 10.0, 1.0),
            obs(&day(1), "B", 0.0, 10.0, 1.0),
        ])
        .unwrap();
        // keep only A on day 0
        let q = p.retain_rows(&[true, false, false, false]);
        assert_eq!(q.n_dates(), 1);
        assert_eq!(q.stock_ids(), &["A".to_string()]);
        assert_eq!(q.n_observations(), 1);
    }
}
