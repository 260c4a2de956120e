//! Expression evaluation over a [`Panel`].
//!
//! Time-series operators walk each stock's own observation history;
//! cross-sectional operators work within a date over the finite entries.

use crate::grid::Grid;
use crate::panel::{zscore_cross_section, Panel};
use crate::stats::{average_ranks, mean, sample_std};

use super::{BinaryOp, CsOp, FactorExpr, GrammarError, UnaryOp, WindowOp};

const DIV_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FactorSeries {
    /// Structural hash of the generating expression.
    pub id: String,
    pub values: Grid,
    /// Finite entries per date.
    pub coverage: Vec<usize>,
    /// Cells where finite inputs produced a non-finite result, set to missing.
    pub overflow_count: usize,
    /// Dates on which a cross-sectional operator had a degenerate input.
    pub degenerate_dates: usize,
}

struct Ctx<'a> {
    panel: &'a Panel,
    overflow: usize,
    degenerate: usize,
}

/// Evaluates `expr` on every panel date.
pub fn evaluate(expr: &FactorExpr, panel: &Panel) -> Result<FactorSeries, GrammarError> {
    let mut ctx = Ctx {
        panel,
        overflow: 0,
        degenerate: 0,
    };
    let values = ctx.node(expr)?;
    let coverage = (0..values.n_dates()).map(|d| values.row_coverage(d)).collect();
    Ok(FactorSeries {
        id: expr.structural_hash(),
        values,
        coverage,
        overflow_count: ctx.overflow,
        degenerate_dates: ctx.degenerate,
    })
}

impl Ctx<'_> {
    fn node(&mut self, e: &FactorExpr) -> Result<Grid, GrammarError> {
        let (nd, ns) = (self.panel.n_dates(), self.panel.n_stocks());
        Ok(match e {
            FactorExpr::Primitive(p) => self
                .panel
                .column(p.name())
                .ok_or_else(|| GrammarError::MissingColumn(p.name().to_string()))?
                .clone(),
            FactorExpr::Const(c) => {
                let mut g = Grid::missing(nd, ns);
                for d in 0..nd {
                    for s in 0..ns {
                        if self.panel.is_present(d, s) {
                            g.set(d, s, *c);
                        }
                    }
                }
                g
            }
            FactorExpr::Unary(op, a) => {
                let mut g = self.node(a)?;
                for v in g.as_mut_slice() {
                    if v.is_finite() {
                        *v = self.finite_or_missing(unary(*op, *v));
                    }
                }
                g
            }
            FactorExpr::Binary(op, a, b) => {
                let mut g = self.node(a)?;
                let h = self.node(b)?;
                for (x, &y) in g.as_mut_slice().iter_mut().zip(h.as_slice()) {
                    *x = if x.is_finite() && y.is_finite() {
                        self.finite_or_missing(binary(*op, *x, y))
                    } else {
                        f64::NAN
                    };
                }
                g
            }
            FactorExpr::Window(op, a, w) => {
                let g = self.node(a)?;
                self.window(*op, &g, *w as usize)
            }
            FactorExpr::Cs(op, a) => {
                let mut g = self.node(a)?;
                for d in 0..nd {
                    let row = g.row_mut(d);
                    let n = row.iter().filter(|v| v.is_finite()).count();
                    if n == 0 {
                        continue;
                    }
                    let (out, degenerate) = match op {
                        CsOp::Rank => {
                            let r = cs_rank(row);
                            (r.values, r.single)
                        }
                        CsOp::ZScore => {
                            let z = zscore_cross_section(row);
                            (z.values, z.degenerate)
                        }
                    };
                    if degenerate {
                        self.degenerate += 1;
                    }
                    row.copy_from_slice(&out);
                }
                g
            }
        })
    }

    fn finite_or_missing(&mut self, v: f64) -> f64 {
        if v.is_finite() {
            v
        } else {
            // Only finite inputs reach here, so a NaN from a domain rule is
            // not an overflow; infinities are.
            if v.is_infinite() {
                self.overflow += 1;
            }
            f64::NAN
        }
    }

    fn window(&mut self, op: WindowOp, x: &Grid, w: usize) -> Grid {
        let (nd, ns) = (x.n_dates(), x.n_stocks());
        let mut out = Grid::missing(nd, ns);
        let mut buf = Vec::with_capacity(w);
        for s in 0..ns {
            let hist = self.panel.history(s);
            for (i, &d) in hist.iter().enumerate() {
                let d = d as usize;
                let at = |k: usize| x.get(hist[k] as usize, s);
                let v = match op {
                    WindowOp::Lag => {
                        if i >= w {
                            at(i - w)
                        } else {
                            f64::NAN
                        }
                    }
                    WindowOp::Delta => {
                        if i >= w && w > 0 {
                            at(i) - at(i - w)
                        } else {
                            f64::NAN
                        }
                    }
                    _ => {
                        if w == 0 || i + 1 < w {
                            f64::NAN
                        } else {
                            buf.clear();
                            buf.extend((i + 1 - w..=i).map(at));
                            if buf.iter().all(|v| v.is_finite()) {
                                rolling(op, &buf)
                            } else {
                                f64::NAN
                            }
                        }
                    }
                };
                let v = if v.is_nan() {
                    v
                } else {
                    self.finite_or_missing(v)
                };
                out.set(d, s, v);
            }
        }
        out
    }
}

fn unary(op: UnaryOp, x: f64) -> f64 {
    match op {
        UnaryOp::Neg => -x,
        UnaryOp::Abs => x.abs(),
        UnaryOp::Log1p => {
            if x >= 0.0 {
                x.ln_1p()
            } else {
                f64::NAN
            }
        }
        UnaryOp::Sign => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

fn binary(op: BinaryOp, a: f64, b: f64) -> f64 {
    match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b.abs() < DIV_EPS {
                f64::NAN
            } else {
                a / b
            }
        }
    }
}

fn rolling(op: WindowOp, win: &[f64]) -> f64 {
    match op {
        WindowOp::RollingMean => mean(win),
        WindowOp::RollingStd => sample_std(win),
        WindowOp::RollingSum => win.iter().sum(),
        WindowOp::RollingMax => win.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        WindowOp::RollingMin => win.iter().copied().fold(f64::INFINITY, f64::min),
        WindowOp::Lag | WindowOp::Delta => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRow {
    pub values: Vec<f64>,
    /// Exactly one finite entry, which received the midpoint 0.5.
    pub single: bool,
}

/// Fractional ranks `(rank - 1) / (n - 1)` over finite entries, ties averaged.
pub fn cs_rank(values: &[f64]) -> RankedRow {
    let idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    let mut out = vec![f64::NAN; values.len()];
    match idx.len() {
        0 => {}
        1 => out[idx[0]] = 0.5,
        n => {
            let finite: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let ranks = average_ranks(&finite);
            for (&i, r) in idx.iter().zip(ranks) {
                out[i] = (r - 1.0) / (n - 1) as f64;
            }
        }
    }
    RankedRow {
        values: out,
        single: idx.len() == 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_expr, random_expr, Budget};
    use crate::panel::{build_primitives, RawObservation};
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn panel(prices: &[&[f64]]) -> Panel {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let mut rows = Vec::new();
        for (s, series) in prices.iter().enumerate() {
            for (d, &p) in series.iter().enumerate() {
                if p.is_nan() {
                    continue;
                }
                rows.push(RawObservation {
                    date: start + chrono::Days::new(d as u64),
                    stock_id: format!("S{s}"),
                    ret: p / 100.0,
                    price: p,
                    volume: 100.0 + p,
                    exchange_code: 1,
                    share_code: 10,
                    market_ret_vw: 0.0,
                    market_ret_sp: 0.0,
                    bid: None,
                    ask: None,
                });
            }
        }
        build_primitives(Panel::from_observations(rows).unwrap())
    }

    fn eval(text: &str, p: &Panel) -> FactorSeries {
        evaluate(&parse_expr(text, &Budget::default()).unwrap(), p).unwrap()
    }

    #[test]
    fn lag_uses_previous_trading_date_of_stock() {
        // stock 0 skips day 2
        let p = panel(&[&[1.0, 2.0, f64::NAN, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        let s = eval("lag(ret, 1)", &p);
        assert_eq!(s.values.get(3, 0), 0.02);
        assert!(s.values.get(2, 0).is_nan());
        assert_eq!(s.values.get(3, 1), 0.07);
        assert!(s.values.get(0, 1).is_nan());
    }

    #[test]
    fn rolling_mean_hand() {
        let p = panel(&[&[1.0, 2.0, 3.0, 4.0]]);
        let s = eval("rolling_mean(price, 3)", &p);
        assert_eq!(s.values.get(3, 0), 3.0);
        assert!(s.values.get(1, 0).is_nan());
    }

    #[test]
    fn cs_rank_on_panel() {
        let p = panel(&[&[10.0], &[20.0], &[30.0]]);
        let s = eval("cs_rank(price)", &p);
        assert_eq!(s.values.row(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn cs_rank_conventions() {
        let v: Vec<f64> = (0..5).map(f64::from).collect();
        assert_eq!(cs_rank(&v).values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(cs_rank(&[2.0; 4]).values, vec![0.5; 4]);
        assert_eq!(cs_rank(&[3.0, 1.0, 3.0]).values, vec![0.75, 0.0, 0.75]);
        let r = cs_rank(&[f64::NAN, 7.0]);
        assert!(r.single);
        assert_eq!(r.values[1], 0.5);
    }

    #[test]
    fn protected_division() {
        let p = panel(&[&[1.0, 2.0]]);
        let s = eval("div(price, sub(price, price))", &p);
        assert!(s.values.as_slice().iter().all(|v| v.is_nan()));
        assert_eq!(s.overflow_count, 0);
    }

    #[test]
    fn overflow_saturates_to_missing() {
        let p = panel(&[&[1.0]]);
        let s = eval("mul(mul(1e200, price), 1e200)", &p);
        assert!(s.values.get(0, 0).is_nan());
        assert_eq!(s.overflow_count, 1);
    }

    proptest! {
        #[test]
        fn cs_rank_monotone_invariant(v in proptest::collection::vec(-1000i32..1000, 2..60)) {
            // integer inputs keep the cubic transform exact and strictly increasing
            let x: Vec<f64> = v.iter().map(|&i| f64::from(i)).collect();
            let y: Vec<f64> = x.iter().map(|t| t * t * t + 5.0 * t - 11.0).collect();
            let a = cs_rank(&x).values;
            let b = cs_rank(&y).values;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn no_non_finite_escapes(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = panel(&[
                &[1.0, 0.0, 3.0, 1e-13, 5.0, 6.0, 0.0],
                &[2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0],
                &[9.0, f64::NAN, 1e300, 4.0, 0.5, 0.0, 1.0],
            ]);
            let e = random_expr(&mut rng, &Budget::default());
            let s = evaluate(&e, &p).unwrap();
            prop_assert!(s.values.as_slice().iter().all(|v| v.is_finite() || v.is_nan()));
        }
    }
}
