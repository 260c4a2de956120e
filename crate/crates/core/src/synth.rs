//! Synthetic panels with a known data-generating process.
//!
//! Volume and spread paths are drawn first. The hidden signal is evaluated on
//! them with the factor grammar, and returns are then generated as
//!
//! ```text
//! ret[t+1, i] = coef * (signal[t, i] - 0.5) + sigma * eps[t+1, i]
//! ```
//!
//! where `signal` is a cross-sectional rank in `[0, 1]` (centered so the
//! market return carries no drift). Hidden expressions may therefore only use
//! primitives that do not depend on returns: `volume`, `vol_ratio`,
//! `vol_growth` and `spread`.
//!
//! * log volume is `ln(base_i) + vol_noise * z[t, i]` with `z` i.i.d., so
//!   `vol_growth` carries one day of information;
//! * log relative spread follows an AR(1) with coefficient `spread_ar`, so a
//!   spread signal persists for weeks;
//! * prices follow a bounded mean-reverting path independent of returns, so
//!   the price screen keeps the universe intact.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::{BenchmarkReturns, CMA, HML, MKT_RF, MOM, RF, RMW, SMB};
use crate::grammar::{cs_rank, evaluate, parse_expr, Budget, FactorExpr, GrammarError, Primitive};
use crate::grid::Grid;
use crate::panel::{build_primitives, Panel, PanelError, RawObservation};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("hidden expression uses {0}, which depends on returns")]
    ReturnDependent(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("invalid synth parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SynthKind {
    /// `coef * (cs_rank(hidden) - 0.5)`.
    Planted { hidden: String },
    /// `coef * (linear_share * a + (1 - linear_share) * 4 * a * b)` with
    /// `a`, `b` the centered ranks of the two expressions.
    Interaction {
        a: String,
        b: String,
        linear_share: f64,
    },
    /// Pure noise.
    Null,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub n_stocks: usize,
    pub n_days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    pub coef: f64,
    pub sigma: f64,
    pub vol_noise: f64,
    pub spread_ar: f64,
    /// Extra stocks that fail one of the default screens.
    pub junk_stocks: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            kind: SynthKind::Planted {
                hidden: "vol_growth".into(),
            },
            n_stocks: 100,
            n_days: 1300,
            start: NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date"),
            seed: 7,
            coef: 0.02,
            sigma: 0.11,
            vol_noise: 0.3,
            spread_ar: 0.98,
            junk_stocks: 0,
        }
    }
}

/// Weekdays from `start` on.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

const RETURN_FREE: [Primitive; 4] = [
    Primitive::Volume,
    Primitive::VolRatio,
    Primitive::VolGrowth,
    Primitive::Spread,
];

fn hidden(text: &str) -> Result<FactorExpr, SynthError> {
    let e = parse_expr(text, &Budget::default())?;
    e.validate_no_lookahead(&Budget::default())?;
    if let Some(p) = e.primitives().into_iter().find(|p| !RETURN_FREE.contains(p)) {
        return Err(SynthError::ReturnDependent(p.name().into()));
    }
    Ok(e)
}

fn centered_rank(g: &Grid) -> Grid {
    g.map_rows(|_, row| cs_rank(row).values.into_iter().map(|v| v - 0.5).collect())
}

/// The generated rows and the hidden per-date signal (`signal[t]` drives
/// `ret[t + 1]`; missing where the hidden expression is undefined).
pub struct SynthOutput {
    pub observations: Vec<RawObservation>,
    pub signal: Grid,
    pub dates: Vec<NaiveDate>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    if cfg.n_stocks < 2 || cfg.n_days < 2 {
        return Err(SynthError::Invalid("need at least 2 stocks and 2 days".into()));
    }
    if !(cfg.sigma >= 0.0 && cfg.vol_noise >= 0.0 && cfg.spread_ar.abs() < 1.0) {
        return Err(SynthError::Invalid("sigma, vol_noise >= 0 and |spread_ar| < 1 required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (nd, ns) = (cfg.n_days, cfg.n_stocks);
    let dates = business_days(cfg.start, nd);
    let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);

    // volume, spread and price paths
    let base: Vec<f64> = (0..ns).map(|_| 1e5 * (2.0 * normal(&mut rng)).exp()).collect();
    let p0: Vec<f64> = (0..ns).map(|_| 20.0 + 80.0 * rng.random::<f64>()).collect();
    let mut volume = Grid::missing(nd, ns);
    let mut rel_spread = Grid::missing(nd, ns);
    let mut price = Grid::missing(nd, ns);
    let mut log_spread: Vec<f64> = (0..ns).map(|_| -6.0 + 0.5 * normal(&mut rng)).collect();
    let mut log_px = vec![0.0f64; ns];
    for d in 0..nd {
        for s in 0..ns {
            volume.set(d, s, (base[s].ln() + cfg.vol_noise * normal(&mut rng)).exp());
            log_spread[s] = -6.0 + cfg.spread_ar * (log_spread[s] + 6.0)
                + 0.5 * (1.0 - cfg.spread_ar * cfg.spread_ar).sqrt() * normal(&mut rng);
            rel_spread.set(d, s, log_spread[s].exp());
            log_px[s] = 0.97 * log_px[s] + 0.02 * normal(&mut rng);
            price.set(d, s, p0[s] * log_px[s].exp());
        }
    }

    let rows = |ret: &Grid| -> Vec<RawObservation> {
        let mut out = Vec::with_capacity(nd * ns);
        for d in 0..nd {
            let mkt = ret.row(d).iter().sum::<f64>() / ns as f64;
            for s in 0..ns {
                let p = price.get(d, s);
                let half = 0.5 * rel_spread.get(d, s) * p;
                out.push(RawObservation {
                    date: dates[d],
                    stock_id: format!("S{s:04}"),
                    ret: ret.get(d, s),
                    price: p,
                    volume: volume.get(d, s),
                    exchange_code: 1 + (s % 3) as i32,
                    share_code: 10 + (s % 2) as i32,
                    market_ret_vw: mkt,
                    market_ret_sp: mkt,
                    bid: Some(p - half),
                    ask: Some(p + half),
                });
            }
        }
        out
    };

    // Evaluate the hidden signal on a return-free draft panel.
    let draft = build_primitives(Panel::from_observations(rows(&Grid::filled(nd, ns, 0.0)))?);
    let signal = match &cfg.kind {
        SynthKind::Planted { hidden: h } => centered_rank(&evaluate(&hidden(h)?, &draft)?.values),
        SynthKind::Interaction { a, b, linear_share } => {
            let ga = centered_rank(&evaluate(&hidden(a)?, &draft)?.values);
            let gb = centered_rank(&evaluate(&hidden(b)?, &draft)?.values);
            let mut g = Grid::missing(nd, ns);
            for d in 0..nd {
                for s in 0..ns {
                    let (x, y) = (ga.get(d, s), gb.get(d, s));
                    g.set(d, s, linear_share * x + (1.0 - linear_share) * 4.0 * x * y);
                }
            }
            g
        }
        SynthKind::Null => Grid::filled(nd, ns, 0.0),
    };

    let mut ret = Grid::filled(nd, ns, 0.0);
    for d in 0..nd {
        for s in 0..ns {
            let lead = if d == 0 { 0.0 } else { signal.get(d - 1, s) };
            let lead = if lead.is_finite() { lead } else { 0.0 };
            ret.set(d, s, cfg.coef * lead + cfg.sigma * normal(&mut rng));
        }
    }
    let market: Vec<f64> = (0..nd).map(|d| ret.row(d).iter().sum::<f64>() / ns as f64).collect();
    let mut observations = rows(&ret);
    observations.extend(junk(cfg, &dates, &market, &mut rng));
    Ok(SynthOutput {
        observations,
        signal,
        dates,
    })
}

/// Stocks that each fail one default screen: exchange, share code, price, or history.
fn junk(cfg: &SynthConfig, dates: &[NaiveDate], market: &[f64], rng: &mut ChaCha8Rng) -> Vec<RawObservation> {
    let mut out = Vec::new();
    for j in 0..cfg.junk_stocks {
        let kind = j % 4;
        let days = if kind == 3 { dates.len().min(100) } else { dates.len() };
        for d in dates.len() - days..dates.len() {
            out.push(RawObservation {
                date: dates[d],
                stock_id: format!("J{j:04}"),
                ret: 0.02 * rng.sample::<f64, _>(StandardNormal),
                price: if kind == 2 { 2.5 } else { 30.0 },
                volume: 1e4,
                exchange_code: if kind == 0 { 4 } else { 1 },
                share_code: if kind == 1 { 31 } else { 10 },
                market_ret_vw: market[d],
                market_ret_sp: market[d],
                bid: None,
                ask: None,
            });
        }
    }
    out
}

/// Benchmark factor returns for a synthetic panel: `MKT-RF` is the market
/// series minus a constant `RF`; the other five factors are independent
/// Gaussian noise with 0.5% daily volatility.
pub fn synth_benchmark(dates: &[NaiveDate], market: &[f64], seed: u64) -> BenchmarkReturns {
    const RF_DAILY: f64 = 0.0001;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBE4C_4A11);
    let mut columns = BTreeMap::new();
    columns.insert(MKT_RF.to_string(), market.iter().map(|m| m - RF_DAILY).collect());
    for name in [SMB, HML, RMW, CMA, MOM] {
        let v: Vec<f64> = (0..dates.len()).map(|_| 0.005 * rng.sample::<f64, _>(StandardNormal)).collect();
        columns.insert(name.to_string(), v);
    }
    columns.insert(RF.to_string(), vec![RF_DAILY; dates.len()]);
    BenchmarkReturns {
        dates: dates.to_vec(),
        columns,
        source: format!("synthetic seed={seed}"),
    }
}

/// Generates and builds the primitive panel in one step.
pub fn synth_panel(cfg: &SynthConfig) -> Result<(Panel, Grid), SynthError> {
    let out = generate(cfg)?;
    let panel = build_primitives(Panel::from_observations(out.observations)?);
    Ok((panel, out.signal))
}
