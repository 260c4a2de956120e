//! Delimited-text tables in the layouts of the published result tables, and
//! SVG line charts.
//!
//! Every file starts with a `# alphaloop config_hash=... seed=...` comment
//! line. Undefined statistics print as `NA`.

mod svg;

use std::io::Write;

use chrono::NaiveDate;

use crate::attribution::{AlphaEstimate, ModelSpec};
use crate::backtest::{BacktestReport, HorizonStat, QuarterRow, SeriesSummary};
use crate::metrics::EvalMetrics;
use crate::panel::ScreenReport;

pub use svg::{line_chart, Series};

pub const TABLE1_HEADER: [&str; 3] = ["Screen", "Obs", "Stocks"];
pub const TABLE3_HEADER: [&str; 10] = [
    "Factor", "Sharpe", "IC", "ICIR", "ICL", "ICLIR", "Sortino", "Calmar", "Annual Ret", "Max DD",
];
pub const ALPHA_COLUMNS: [&str; 4] = ["CAPM α", "FF3 α", "FF5 α", "FF6 α"];
pub const TABLE5_HEADER: [&str; 7] = [
    "Portfolio",
    "Period Ret. (%)",
    "Ann. Ret. (%)",
    "Ann. Vol. (%)",
    "Sharpe",
    "Max DD (%)",
    "N",
];
pub const TABLE7_HEADER: [&str; 4] = ["Portfolio", "Period Return (%)", "Ann. Sharpe", "N Days"];
pub const TABLE9_HEADER: [&str; 6] = [
    "Quarter",
    "Avg Turnover (%)",
    "Gross Ret (%)",
    "Net Ret (%)",
    "Gross Sharpe",
    "Net Sharpe",
];

/// Header line stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    pub fn line(&self) -> String {
        format!("# alphaloop config_hash={} seed={}", self.config_hash, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Table {
        Table {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W, stamp: &Stamp) -> std::io::Result<()> {
        let mut out = out;
        writeln!(out, "{}", stamp.line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()
    }

    pub fn to_string(&self, stamp: &Stamp) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, stamp).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "NA".into(),
    }
}

fn pct(v: Option<f64>) -> String {
    fixed(v.map(|x| 100.0 * x), 2)
}

pub fn table1(report: &ScreenReport) -> Table {
    let mut t = Table::new(&TABLE1_HEADER);
    for r in &report.rows {
        t.push(vec![r.name.clone(), r.remaining_observations.to_string(), r.remaining_stocks.to_string()]);
    }
    t
}

/// Annual return and drawdown in percent; drawdown printed as a loss.
pub fn table3(rows: &[(String, EvalMetrics)]) -> Table {
    let mut t = Table::new(&TABLE3_HEADER);
    for (name, m) in rows {
        t.push(vec![
            name.clone(),
            fixed(m.sharpe, 2),
            fixed(m.mean_ic, 4),
            fixed(m.icir, 2),
            fixed(m.icl, 4),
            fixed(m.iclir, 2),
            fixed(m.sortino, 2),
            fixed(m.calmar, 2),
            pct(m.ann_return),
            pct(m.max_drawdown.map(|d| -d)),
        ]);
    }
    t
}

/// Annualized alphas in percent with Newey-West t-statistics in parentheses
/// on the following row. `first` names the row dimension.
pub fn alpha_table(first: &str, rows: &[(String, Vec<AlphaEstimate>)]) -> Table {
    let mut header = vec![first.to_string()];
    header.extend(ALPHA_COLUMNS.iter().map(|s| s.to_string()));
    let mut t = Table::new(&header);
    for (name, ests) in rows {
        let find = |spec: ModelSpec| ests.iter().find(|e| e.spec == spec);
        let mut a = vec![name.clone()];
        let mut ts = vec![String::new()];
        for spec in ModelSpec::TABLE {
            a.push(pct(find(spec).map(|e| e.alpha_annualized)));
            ts.push(match find(spec) {
                Some(e) if e.nw_tstat.is_finite() => format!("({:.2})", e.nw_tstat),
                _ => "NA".into(),
            });
        }
        t.push(a);
        t.push(ts);
    }
    t
}

fn quarter_label(q: &QuarterRow) -> String {
    if q.partial {
        format!("{} (partial)", q.label)
    } else {
        q.label.clone()
    }
}

/// Whole-period row then one row per calendar quarter.
pub fn table5(name: &str, summary: &SeriesSummary, quarterly: &[QuarterRow]) -> Table {
    let mut t = Table::new(&TABLE5_HEADER);
    let p = &summary.perf;
    t.push(vec![
        name.to_string(),
        pct(Some(summary.period_return)),
        pct(p.ann_return),
        pct(p.ann_vol),
        fixed(p.sharpe, 2),
        pct(Some(-p.max_drawdown)),
        p.n.to_string(),
    ]);
    for q in quarterly {
        t.push(vec![
            quarter_label(q),
            pct(Some(q.period_return)),
            pct(q.ann_return),
            pct(q.ann_vol),
            fixed(q.sharpe, 2),
            pct(Some(-q.max_drawdown)),
            q.n.to_string(),
        ]);
    }
    t
}

/// Bucket rows `D1..Dq` then the top-minus-bottom spread.
pub fn table7(report: &BacktestReport) -> Table {
    let mut t = Table::new(&TABLE7_HEADER);
    let row = |label: String, s: &SeriesSummary| {
        vec![label, pct(Some(s.period_return)), fixed(s.perf.sharpe, 2), s.perf.n.to_string()]
    };
    for s in &report.decile_summaries {
        t.push(row(s.name.clone(), s));
    }
    t.push(row(format!("Gross (D{}-D1)", report.q), &report.gross_summary));
    t
}

/// Annualized mean in percent with the Newey-West t in parentheses.
pub fn table8(rows: &[(String, Vec<HorizonStat>)]) -> Table {
    let h = rows.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let mut header = vec!["Portfolio".to_string()];
    header.extend((1..=h).map(|k| format!("H{k}")));
    let mut t = Table::new(&header);
    for (name, stats) in rows {
        let mut r = vec![name.clone()];
        for k in 0..h {
            r.push(match stats.get(k) {
                Some(s) => match (s.ann_mean, s.nw_t) {
                    (Some(m), Some(tv)) => format!("{:.2} ({:.2})", 100.0 * m, tv),
                    (Some(m), None) => format!("{:.2} (NA)", 100.0 * m),
                    _ => "NA".into(),
                },
                None => "NA".into(),
            });
        }
        t.push(r);
    }
    t
}

/// Turnover is printed per side: half the two-leg total, so a full daily
/// flip of both legs reads 100%.
pub fn table9(quarterly: &[QuarterRow]) -> Table {
    let mut t = Table::new(&TABLE9_HEADER);
    for q in quarterly {
        t.push(vec![
            quarter_label(q),
            pct(q.avg_turnover.map(|x| x / 2.0)),
            pct(Some(q.period_return)),
            pct(q.net_period_return),
            fixed(q.sharpe, 2),
            fixed(q.net_sharpe, 2),
        ]);
    }
    t
}

/// `date` then one column per series, as decimals.
pub fn series_table(dates: &[NaiveDate], columns: &[(String, Vec<f64>)]) -> Table {
    let mut header = vec!["date".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    let mut t = Table::new(&header);
    for (i, d) in dates.iter().enumerate() {
        let mut r = vec![d.format("%Y-%m-%d").to_string()];
        r.extend(columns.iter().map(|(_, v)| match v.get(i) {
            Some(x) if x.is_finite() => x.to_string(),
            _ => "NA".into(),
        }));
        t.push(r);
    }
    t
}

/// Compounded wealth starting at 1.
pub fn cumulative(returns: &[f64]) -> Vec<f64> {
    let mut w = 1.0;
    returns
        .iter()
        .map(|r| {
            w *= 1.0 + r;
            w
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::quarterly_table;
    use crate::synth::business_days;

    fn stamp() -> Stamp {
        Stamp {
            config_hash: "abc".into(),
            seed: 7,
        }
    }

    #[test]
    fn stamp_then_header() {
        let mut t = Table::new(&TABLE1_HEADER);
        t.push(vec!["Raw sample".into(), "10".into(), "2".into()]);
        let s = t.to_string(&stamp());
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# alphaloop config_hash=abc seed=7");
        assert_eq!(lines[1], "Screen,Obs,Stocks");
        assert_eq!(lines[2], "Raw sample,10,2");
    }

    #[test]
    fn commas_in_names_are_quoted() {
        let rows = vec![("div(a, b)".to_string(), EvalMetrics::default())];
        let s = table3(&rows).to_string(&stamp());
        assert!(s.contains("\"div(a, b)\",NA,NA"));
        assert!(s.lines().nth(1).unwrap().ends_with("Annual Ret,Max DD"));
    }

    #[test]
    fn quarterly_tables_use_exact_headers() {
        let dates = business_days(NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(), 70);
        let gross = vec![0.001; 70];
        let to = vec![0.5; 70];
        let net: Vec<f64> = gross.iter().map(|g| g - 0.5 * 3e-4).collect();
        let q = quarterly_table(&dates, &gross, Some(&to), Some(&net));
        let t9 = table9(&q).to_string(&stamp());
        assert_eq!(
            t9.lines().nth(1).unwrap(),
            "Quarter,Avg Turnover (%),Gross Ret (%),Net Ret (%),Gross Sharpe,Net Sharpe"
        );
        assert!(t9.lines().nth(2).unwrap().starts_with("2021Q1,25.00,"));
        let t5 = table5("Long-Short", &SeriesSummary::new("Gross", &gross), &q).to_string(&stamp());
        assert_eq!(
            t5.lines().nth(1).unwrap(),
            "Portfolio,Period Ret. (%),Ann. Ret. (%),Ann. Vol. (%),Sharpe,Max DD (%),N"
        );
        assert!(t5.lines().nth(2).unwrap().starts_with("Long-Short,"));
        assert!(t5.lines().nth(4).unwrap().starts_with("2021Q2 (partial),"));
    }

    #[test]
    fn cumulative_compounds() {
        let c = cumulative(&[0.1, -0.1]);
        assert!((c[1] - 0.99).abs() < 1e-15);
    }
}
