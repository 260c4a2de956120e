//! The ten baseline predictors.
//!
//! Trailing windows cover the last [`PRIMITIVE_WINDOW`] observations of a
//! stock up to and including date `t`. A window with fewer observations, or
//! containing a missing value, yields a missing entry.

use crate::grid::Grid;
use crate::stats::{mean, sample_std};

use super::{Panel, COL_ASK, COL_BID, COL_MKT_VW, COL_PRICE, COL_RET, COL_VOLUME};

pub const PRIMITIVE_WINDOW: usize = 20;

/// Names of the primitive columns, in grammar order.
pub const PRIMITIVES: [&str; 10] = [
    "ret",
    "mkt_ret",
    "price",
    "volume",
    "vol_ratio",
    "rvol20",
    "price_ma",
    "mkt_vol",
    "vol_growth",
    "spread",
];

/// Adds the ten primitive columns to `panel` and returns it.
///
/// `ret`, `price` and `volume` already exist as raw columns; `mkt_ret` copies
/// the value-weighted market return.
pub fn build_primitives(mut panel: Panel) -> Panel {
    let (nd, ns) = (panel.n_dates(), panel.n_stocks());
    let ret = panel.column(COL_RET).unwrap().clone();
    let price = panel.column(COL_PRICE).unwrap().clone();
    let volume = panel.column(COL_VOLUME).unwrap().clone();
    let bid = panel.column(COL_BID).unwrap().clone();
    let ask = panel.column(COL_ASK).unwrap().clone();

    let mut vol_ratio = Grid::missing(nd, ns);
    let mut rvol = Grid::missing(nd, ns);
    let mut price_ma = Grid::missing(nd, ns);
    let mut vol_growth = Grid::missing(nd, ns);
    let mut spread = Grid::missing(nd, ns);

    let mut buf = Vec::with_capacity(PRIMITIVE_WINDOW);
    for s in 0..ns {
        let hist = panel.history(s);
        for (i, &d) in hist.iter().enumerate() {
            let d = d as usize;
            if i + 1 >= PRIMITIVE_WINDOW {
                let win = &hist[i + 1 - PRIMITIVE_WINDOW..=i];
                let v = volume.get(d, s);
                if let Some(m) = window_mean(win, s, &volume, &mut buf) {
                    if m > 0.0 {
                        vol_ratio.set(d, s, v / m);
                    }
                }
                if let Some(m) = window_mean(win, s, &price, &mut buf) {
                    if m > 0.0 {
                        price_ma.set(d, s, price.get(d, s) / m);
                    }
                }
                if fill_window(win, s, &ret, &mut buf) {
                    rvol.set(d, s, sample_std(&buf));
                }
            }
            if i >= 1 {
                let prev = volume.get(hist[i - 1] as usize, s);
                let cur = volume.get(d, s);
                if prev > 0.0 && cur.is_finite() {
                    vol_growth.set(d, s, cur / prev - 1.0);
                }
            }
            let (b, a) = (bid.get(d, s), ask.get(d, s));
            let mid = 0.5 * (a + b);
            if b.is_finite() && a.is_finite() && mid > 0.0 {
                spread.set(d, s, (a - b) / mid);
            }
        }
    }

    // Market volatility is a date-level series broadcast to observed stocks.
    let mkt = panel.market_series(COL_MKT_VW);
    let mut mkt_vol_series = vec![f64::NAN; nd];
    for d in PRIMITIVE_WINDOW.saturating_sub(1)..nd {
        let win = &mkt[d + 1 - PRIMITIVE_WINDOW..=d];
        if win.iter().all(|v| v.is_finite()) {
            mkt_vol_series[d] = sample_std(win);
        }
    }
    let mut mkt_vol = Grid::missing(nd, ns);
    for (d, &v) in mkt_vol_series.iter().enumerate() {
        mkt_vol.row_mut(d).fill(v);
    }

    let mkt_ret = panel.column(COL_MKT_VW).unwrap().clone();
    panel.insert_column("mkt_ret", mkt_ret);
    panel.insert_column("vol_ratio", vol_ratio);
    panel.insert_column("rvol20", rvol);
    panel.insert_column("price_ma", price_ma);
    panel.insert_column("mkt_vol", mkt_vol);
    panel.insert_column("vol_growth", vol_growth);
    panel.insert_column("spread", spread);
    panel
}

fn fill_window(win: &[u32], s: usize, g: &Grid, buf: &mut Vec<f64>) -> bool {
    buf.clear();
    buf.extend(win.iter().map(|&d| g.get(d as usize, s)));
    buf.iter().all(|v| v.is_finite())
}

fn window_mean(win: &[u32], s: usize, g: &Grid, buf: &mut Vec<f64>) -> Option<f64> {
    fill_window(win, s, g, buf).then(|| mean(buf))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    fn series(n: usize, f: impl Fn(usize) -> (f64, f64, f64)) -> Panel {
        let rows = (0..n)
            .map(|i| {
                let (r, p, v) = f(i);
                obs(&day(i), "A", r, p, v)
            })
            .collect();
        build_primitives(Panel::from_observations(rows).unwrap())
    }

    #[test]
    fn constant_volume() {
        let p = series(40, |_| (0.01, 10.0, 1234.5));
        let vr = p.column("vol_ratio").unwrap();
        let vg = p.column("vol_growth").unwrap();
        for d in 19..40 {
            assert_eq!(vr.get(d, 0), 1.0);
            assert_eq!(vg.get(d, 0), 0.0);
        }
        assert!(vr.get(18, 0).is_nan());
    }

    #[test]
    fn constant_return_has_zero_vol() {
        let p = series(25, |_| (0.003, 10.0, 1.0));
        assert_eq!(p.column("rvol20").unwrap().get(24, 0), 0.0);
    }

    #[test]
    fn price_to_ma_window_oracle() {
        let price = |i: usize| 10.0 + (i as f64 * 0.7).sin() * 3.0 + i as f64 * 0.1;
        let p = series(30, |i| (0.0, price(i), 1.0));
        // day 30 (index 29) over days 11..=30 (indices 10..=29)
        let mut sum = 0.0;
        for i in 10..30 {
            sum += price(i);
        }
        let expected = price(29) / (sum / 20.0);
        let got = p.column("price_ma").unwrap().get(29, 0);
        assert!((got - expected).abs() < 1e-14, "{got} vs {expected}");
    }

    #[test]
    fn spread_requires_quotes() {
        let mut o = obs(&day(0), "A", 0.0, 10.0, 1.0);
        o.bid = Some(9.9);
        o.ask = Some(10.1);
        let q = obs(&day(0), "B", 0.0, 10.0, 1.0);
        let p = build_primitives(Panel::from_observations(vec![o, q]).unwrap());
        let sp = p.column("spread").unwrap();
        assert!((sp.get(0, 0) - 0.02).abs() < 1e-12);
        assert!(sp.get(0, 1).is_nan());
    }
}
