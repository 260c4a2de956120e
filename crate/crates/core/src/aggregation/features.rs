//! Per-(date, stock) design rows and the equal-weight composite.

use std::ops::Range;

use crate::grid::Grid;
use crate::panel::{clip, cs_normalize, winsorize_bounds};

use super::AggregationError;

/// Per-date quantiles at which the fitting target is clipped.
pub const TARGET_WINSOR: (f64, f64) = (0.01, 0.99);

/// Rows grouped by date in ascending order. Features are the per-date
/// normalized factor values at the row's date; the target is the
/// winsorized next-day return.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Row-major, `n_rows * names.len()`, NaN where missing.
    pub x: Vec<f64>,
    /// NaN where the next-day return is unknown.
    pub y: Vec<f64>,
    pub row_date: Vec<usize>,
    pub row_stock: Vec<usize>,
    /// Panel date index of each date position.
    pub dates: Vec<usize>,
    /// Row range of each date position.
    pub date_rows: Vec<Range<usize>>,
    pub n_panel_dates: usize,
    pub n_stocks: usize,
}

impl FeatureMatrix {
    /// Builds rows on `dates` for every stock with at least one finite factor.
    pub fn build(
        names: Vec<String>,
        factors: &[&Grid],
        fwd: &Grid,
        dates: &[usize],
    ) -> Result<FeatureMatrix, AggregationError> {
        let Some(first) = factors.first() else {
            return Err(AggregationError::NoFactors);
        };
        let (nd, ns) = (first.n_dates(), first.n_stocks());
        if names.len() != factors.len()
            || factors.iter().any(|g| g.n_dates() != nd || g.n_stocks() != ns)
            || fwd.n_dates() != nd
            || fwd.n_stocks() != ns
        {
            return Err(AggregationError::ShapeMismatch);
        }
        let m = factors.len();
        let mut fm = FeatureMatrix {
            names,
            x: Vec::new(),
            y: Vec::new(),
            row_date: Vec::new(),
            row_stock: Vec::new(),
            dates: dates.to_vec(),
            date_rows: Vec::with_capacity(dates.len()),
            n_panel_dates: nd,
            n_stocks: ns,
        };
        for &d in dates {
            let cols: Vec<Vec<f64>> = factors.iter().map(|g| cs_normalize(g.row(d)).values).collect();
            let target = match winsorize_bounds(fwd.row(d), TARGET_WINSOR.0, TARGET_WINSOR.1) {
                Some((lo, hi)) => clip(fwd.row(d), lo, hi),
                None => fwd.row(d).to_vec(),
            };
            let start = fm.y.len();
            for s in 0..ns {
                if cols.iter().all(|c| !c[s].is_finite()) {
                    continue;
                }
                fm.x.extend((0..m).map(|j| cols[j][s]));
                fm.y.push(target[s]);
                fm.row_date.push(d);
                fm.row_stock.push(s);
            }
            fm.date_rows.push(start..fm.y.len());
        }
        Ok(fm)
    }

    /// A single-date matrix from explicit rows, for fitting outside a panel.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], y: &[f64]) -> FeatureMatrix {
        let n = rows.len();
        assert_eq!(n, y.len(), "one target per row");
        assert!(rows.iter().all(|r| r.len() == names.len()), "row width");
        FeatureMatrix {
            names,
            x: rows.iter().flatten().copied().collect(),
            y: y.to_vec(),
            row_date: vec![0; n],
            row_stock: (0..n).collect(),
            dates: vec![0],
            date_rows: vec![0..n],
            n_panel_dates: 1,
            n_stocks: n,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.x[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.n_features() + j]
    }

    /// Rows of date positions `positions`.
    pub fn rows_of(&self, positions: Range<usize>) -> Range<usize> {
        if positions.is_empty() {
            return 0..0;
        }
        self.date_rows[positions.start].start..self.date_rows[positions.end - 1].end
    }

    /// Matrix restricted to date positions `positions`.
    pub fn slice(&self, positions: Range<usize>) -> FeatureMatrix {
        let rows = self.rows_of(positions.clone());
        let m = self.n_features();
        let offset = rows.start;
        FeatureMatrix {
            names: self.names.clone(),
            x: self.x[rows.start * m..rows.end * m].to_vec(),
            y: self.y[rows.clone()].to_vec(),
            row_date: self.row_date[rows.clone()].to_vec(),
            row_stock: self.row_stock[rows].to_vec(),
            dates: self.dates[positions.clone()].to_vec(),
            date_rows: self.date_rows[positions]
                .iter()
                .map(|r| r.start - offset..r.end - offset)
                .collect(),
            n_panel_dates: self.n_panel_dates,
            n_stocks: self.n_stocks,
        }
    }

    /// Places one value per row into a panel-shaped grid.
    pub fn to_grid(&self, values: &[f64]) -> Grid {
        let mut g = Grid::missing(self.n_panel_dates, self.n_stocks);
        for (i, &v) in values.iter().enumerate() {
            g.set(self.row_date[i], self.row_stock[i], v);
        }
        g
    }
}

/// Row-wise mean of the finite features. Missing when fewer than half of the
/// factors are present.
pub fn equal_weight_composite(fm: &FeatureMatrix) -> Vec<f64> {
    let m = fm.n_features();
    (0..fm.n_rows())
        .map(|i| {
            let finite: Vec<f64> = fm.row(i).iter().copied().filter(|v| v.is_finite()).collect();
            if finite.is_empty() || finite.len() * 2 < m {
                f64::NAN
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            }
        })
        .collect()
}
