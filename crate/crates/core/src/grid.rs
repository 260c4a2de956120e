//! Dense date-major storage for per-(date, stock) values.
//!
//! Missing cells are stored as `NaN`. Every panel column, factor series and
//! score matrix in the crate uses this layout so that cross-sectional work is a
//! contiguous row slice and time-series work walks a column with a fixed stride.

/// A `n_dates x n_stocks` matrix of `f64`, row = date.
#[derive(Debug, Clone)]
pub struct Grid {
    n_dates: usize,
    n_stocks: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn filled(n_dates: usize, n_stocks: usize, value: f64) -> Self {
        Self {
            n_dates,
            n_stocks,
            data: vec![value; n_dates * n_stocks],
        }
    }

    /// All cells missing.
    pub fn missing(n_dates: usize, n_stocks: usize) -> Self {
        Self::filled(n_dates, n_stocks, f64::NAN)
    }

    pub fn from_vec(n_dates: usize, n_stocks: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_dates * n_stocks, "grid shape mismatch");
        Self {
            n_dates,
            n_stocks,
            data,
        }
    }

    #[inline]
    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    #[inline]
    pub fn n_stocks(&self) -> usize {
        self.n_stocks
    }

    #[inline]
    pub fn get(&self, date: usize, stock: usize) -> f64 {
        self.data[date * self.n_stocks + stock]
    }

    #[inline]
    pub fn set(&mut self, date: usize, stock: usize, value: f64) {
        self.data[date * self.n_stocks + stock] = value;
    }

    #[inline]
    pub fn row(&self, date: usize) -> &[f64] {
        &self.data[date * self.n_stocks..(date + 1) * self.n_stocks]
    }

    #[inline]
    pub fn row_mut(&mut self, date: usize) -> &mut [f64] {
        &mut self.data[date * self.n_stocks..(date + 1) * self.n_stocks]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Keeps the first `n_dates` rows.
    pub fn truncated(&self, n_dates: usize) -> Grid {
        let n = n_dates.min(self.n_dates);
        Grid {
            n_dates: n,
            n_stocks: self.n_stocks,
            data: self.data[..n * self.n_stocks].to_vec(),
        }
    }

    /// Applies `f` to every row independently, producing a new grid.
    pub fn map_rows<F>(&self, mut f: F) -> Grid
    where
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        let mut out = Vec::with_capacity(self.data.len());
        for d in 0..self.n_dates {
            let row = f(d, self.row(d));
            debug_assert_eq!(row.len(), self.n_stocks);
            out.extend(row);
        }
        Grid::from_vec(self.n_dates, self.n_stocks, out)
    }

    /// Bit-level equality, treating identical NaN payloads as equal.
    pub fn bit_identical(&self, other: &Grid) -> bool {
        self.n_dates == other.n_dates
            && self.n_stocks == other.n_stocks
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Bit-level equality restricted to rows `0..=last_date`.
    pub fn bit_identical_through(&self, other: &Grid, last_date: usize) -> bool {
        if self.n_stocks != other.n_stocks {
            return false;
        }
        (0..=last_date).all(|d| {
            self.row(d)
                .iter()
                .zip(other.row(d))
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }

    /// Number of finite cells in a row.
    pub fn row_coverage(&self, date: usize) -> usize {
        self.row(date).iter().filter(|v| v.is_finite()).count()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.bit_identical(other)
    }
}
