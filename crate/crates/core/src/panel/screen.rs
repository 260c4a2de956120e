//! Sample screens: exchange, share class, price floor, trading history.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Panel, PanelError, COL_PRICE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    pub eligible_exchanges: BTreeSet<i32>,
    pub common_share_codes: BTreeSet<i32>,
    /// Inclusive lower bound on the absolute price.
    pub min_price: f64,
    pub min_history_days: usize,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            eligible_exchanges: [1, 2, 3].into(),
            common_share_codes: [10, 11].into(),
            min_price: 5.0,
            min_history_days: 252,
        }
    }
}

impl ScreenConfig {
    pub fn validate(&self) -> Result<(), PanelError> {
        if !(self.min_price >= 0.0) {
            return Err(PanelError::InvalidScreen(format!(
                "min_price must be >= 0, got {}",
                self.min_price
            )));
        }
        if self.min_history_days < 1 {
            return Err(PanelError::InvalidScreen(
                "min_history_days must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub name: String,
    pub remaining_observations: usize,
    pub remaining_stocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub rows: Vec<ScreenRow>,
}

impl ScreenReport {
    /// Writes the report as `Screen,Obs,Stocks`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["Screen", "Obs", "Stocks"])?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                r.remaining_observations.to_string(),
                r.remaining_stocks.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Applies the screens in order exchange, share code, price, history.
///
/// The history screen counts the observations that survived the earlier
/// screens. The report starts with the unscreened sample.
pub fn apply_screens(panel: &Panel, cfg: &ScreenConfig) -> Result<(Panel, ScreenReport), PanelError> {
    cfg.validate()?;
    let (nd, ns) = (panel.n_dates(), panel.n_stocks());
    let price = panel.column(COL_PRICE).expect("price column");
    let mut keep: Vec<bool> = (0..nd * ns).map(|k| panel.is_present(k / ns, k % ns)).collect();
    let mut rows = vec![count("Raw sample", &keep, ns)];

    for k in 0..nd * ns {
        if keep[k] && !cfg.eligible_exchanges.contains(&panel.exchange_code(k / ns, k % ns)) {
            keep[k] = false;
        }
    }
    rows.push(count("Exchange eligible", &keep, ns));

    for k in 0..nd * ns {
        if keep[k] && !cfg.common_share_codes.contains(&panel.share_code(k / ns, k % ns)) {
            keep[k] = false;
        }
    }
    rows.push(count("Common shares", &keep, ns));

    for k in 0..nd * ns {
        if keep[k] && !(price.get(k / ns, k % ns).abs() >= cfg.min_price) {
            keep[k] = false;
        }
    }
    rows.push(count(&format!("Price >= {}", cfg.min_price), &keep, ns));

    for s in 0..ns {
        let n = (0..nd).filter(|&d| keep[d * ns + s]).count();
        if n < cfg.min_history_days {
            for d in 0..nd {
                keep[d * ns + s] = false;
            }
        }
    }
    rows.push(count(
        &format!("History >= {} days", cfg.min_history_days),
        &keep,
        ns,
    ));

    Ok((panel.retain_rows(&keep), ScreenReport { rows }))
}

fn count(name: &str, keep: &[bool], ns: usize) -> ScreenRow {
    let mut stocks = vec![false; ns];
    let mut obs = 0;
    for (k, &on) in keep.iter().enumerate() {
        if on {
            obs += 1;
            stocks[k % ns] = true;
        }
    }
    ScreenRow {
        name: name.to_string(),
        remaining_observations: obs,
        remaining_stocks: stocks.iter().filter(|s| **s).count(),
    }
}
