//! Benchmark-model alpha regressions.
//!
//! Portfolio returns are regressed on an intercept and the factors of a
//! [`ModelSpec`]; t-statistics use Newey-West standard errors. Benchmark
//! files follow the public daily research-factor layout:
//!
//! ```text
//! date,MKT-RF,SMB,HML,RMW,CMA,MOM,RF
//! 20210104,-1.41,0.56,0.61,-0.11,0.31,-1.02,0.000
//! ```

mod regression;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::TRADING_DAYS;

pub use regression::{auto_lags, newey_west_mean, ols_newey_west, OlsFit};

pub const MKT_RF: &str = "MKT-RF";
pub const SMB: &str = "SMB";
pub const HML: &str = "HML";
pub const RMW: &str = "RMW";
pub const CMA: &str = "CMA";
pub const MOM: &str = "MOM";
pub const RF: &str = "RF";

/// Default Newey-West lag count at daily frequency.
pub const DEFAULT_NW_LAGS: usize = 5;

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("benchmark file is missing factor {0}")]
    MissingFactor(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("benchmark dates are not strictly increasing at {0}")]
    UnsortedDates(NaiveDate),
    #[error("collinear regressors: design matrix is singular")]
    Collinear,
    #[error("{n} observations for {k} regressors")]
    TooFewObservations { n: usize, k: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Percent,
    Decimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelSpec {
    InterceptOnly,
    Capm,
    Ff3,
    Ff5,
    Ff6,
}

impl ModelSpec {
    pub const TABLE: [ModelSpec; 4] = [ModelSpec::Capm, ModelSpec::Ff3, ModelSpec::Ff5, ModelSpec::Ff6];

    pub fn factors(self) -> &'static [&'static str] {
        match self {
            ModelSpec::InterceptOnly => &[],
            ModelSpec::Capm => &[MKT_RF],
            ModelSpec::Ff3 => &[MKT_RF, SMB, HML],
            ModelSpec::Ff5 => &[MKT_RF, SMB, HML, RMW, CMA],
            ModelSpec::Ff6 => &[MKT_RF, SMB, HML, RMW, CMA, MOM],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelSpec::InterceptOnly => "Mean",
            ModelSpec::Capm => "CAPM",
            ModelSpec::Ff3 => "FF3",
            ModelSpec::Ff5 => "FF5",
            ModelSpec::Ff6 => "FF6",
        }
    }
}

/// Daily factor returns in decimal units.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReturns {
    pub dates: Vec<NaiveDate>,
    pub columns: BTreeMap<String, Vec<f64>>,
    pub source: String,
}

fn canonical_factor(name: &str) -> String {
    let up = name.trim().to_ascii_uppercase();
    match up.as_str() {
        "MKT_RF" | "MKTRF" | "MKT-RF" => MKT_RF.into(),
        "UMD" | "WML" | "MOM" => MOM.into(),
        _ => up,
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y%m%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

impl BenchmarkReturns {
    /// Parses a delimited factor file. The first column is the date
    /// (`YYYYMMDD` or ISO); every other column is a factor. Empty cells are
    /// errors.
    pub fn ingest<R: Read>(source: R, units: Units, source_id: &str) -> Result<Self, AttributionError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = rdr.headers()?.clone();
        let names: Vec<String> = headers.iter().skip(1).map(canonical_factor).collect();
        let scale = match units {
            Units::Percent => 0.01,
            Units::Decimal => 1.0,
        };
        let mut dates = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            let date = rec
                .get(0)
                .and_then(parse_date)
                .ok_or_else(|| AttributionError::Parse {
                    line,
                    msg: format!("bad date {:?}", rec.get(0).unwrap_or("")),
                })?;
            if let Some(&prev) = dates.last() {
                if date <= prev {
                    return Err(AttributionError::UnsortedDates(date));
                }
            }
            dates.push(date);
            for (j, name) in names.iter().enumerate() {
                let cell = rec.get(j + 1).unwrap_or("");
                let v: f64 = cell.parse().map_err(|_| AttributionError::Parse {
                    line,
                    msg: format!("{name}: bad value {cell:?}"),
                })?;
                if !v.is_finite() {
                    return Err(AttributionError::Parse {
                        line,
                        msg: format!("{name}: non-finite value"),
                    });
                }
                cols[j].push(v * scale);
            }
        }
        Ok(BenchmarkReturns {
            dates,
            columns: names.into_iter().zip(cols).collect(),
            source: source_id.to_string(),
        })
    }

    /// Writes decimal values with an ISO date column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), AttributionError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.keys().cloned());
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(self.columns.values().map(|c| format!("{:?}", c[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn require(&self, spec: ModelSpec) -> Result<(), AttributionError> {
        for f in spec.factors() {
            if !self.columns.contains_key(*f) {
                return Err(AttributionError::MissingFactor((*f).to_string()));
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&[f64], AttributionError> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| AttributionError::MissingFactor(name.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NwLags {
    Fixed(usize),
    Auto,
}

impl Default for NwLags {
    fn default() -> Self {
        NwLags::Fixed(DEFAULT_NW_LAGS)
    }
}

impl NwLags {
    pub fn resolve(self, n_obs: usize) -> usize {
        match self {
            NwLags::Fixed(l) => l,
            NwLags::Auto => auto_lags(n_obs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub spec: ModelSpec,
    /// Daily decimal intercept.
    pub alpha: f64,
    /// `(1 + alpha)^252 - 1`.
    pub alpha_annualized: f64,
    pub alpha_se: f64,
    pub nw_tstat: f64,
    pub betas: Vec<(String, f64)>,
    pub nw_lags: usize,
    pub n_obs: usize,
}

/// Whether the portfolio is self-financing (no risk-free subtraction) or a
/// long-only leg (risk-free rate subtracted).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Financing {
    LongShort,
    LongOnly,
}

/// Regresses a dated daily portfolio series on the spec's factors over the
/// dates present in both.
pub fn alpha_regression(
    portfolio: &[(NaiveDate, f64)],
    bench: &BenchmarkReturns,
    spec: ModelSpec,
    financing: Financing,
    lags: NwLags,
) -> Result<AlphaEstimate, AttributionError> {
    bench.require(spec)?;
    let rf = match financing {
        Financing::LongOnly => Some(bench.column(RF)?),
        Financing::LongShort => None,
    };
    let factors: Vec<&[f64]> = spec
        .factors()
        .iter()
        .map(|f| bench.column(f))
        .collect::<Result<_, _>>()?;

    let mut y = Vec::new();
    let mut rows = Vec::new();
    for &(date, r) in portfolio {
        if !r.is_finite() {
            continue;
        }
        let Ok(i) = bench.dates.binary_search(&date) else {
            continue;
        };
        y.push(r - rf.map_or(0.0, |c| c[i]));
        rows.push(i);
    }
    let k = factors.len() + 1;
    let n = y.len();
    if n < 3 * k {
        return Err(AttributionError::TooFewObservations { n, k });
    }
    let x = DMatrix::from_fn(n, k, |r, c| if c == 0 { 1.0 } else { factors[c - 1][rows[r]] });
    let nw = lags.resolve(n);
    let fit = ols_newey_west(&y, &x, nw)?;
    let alpha = fit.coef[0];
    Ok(AlphaEstimate {
        spec,
        alpha,
        alpha_annualized: (1.0 + alpha).powf(TRADING_DAYS) - 1.0,
        alpha_se: fit.se[0],
        nw_tstat: fit.t[0],
        betas: spec
            .factors()
            .iter()
            .zip(&fit.coef[1..])
            .map(|(f, b)| (f.to_string(), *b))
            .collect(),
        nw_lags: nw,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HAND: &str = "date,Mkt-RF,SMB,HML,RF\n\
        20210104,-1.41,0.56,0.61,0.000\n\
        20210105,0.86,1.20,0.44,0.000\n\
        20210106,0.79,2.04,3.98,0.000\n\
        20210107,1.76,-0.67,-0.89,0.000\n\
        20210108,0.50,-0.80,-0.10,0.000\n";

    fn hand() -> BenchmarkReturns {
        BenchmarkReturns::ingest(HAND.as_bytes(), Units::Percent, "hand").unwrap()
    }

    #[test]
    fn percent_divided_by_100() {
        let b = hand();
        assert_eq!(b.dates.len(), 5);
        assert_eq!(b.column(MKT_RF).unwrap()[0], -1.41 * 0.01);
        assert_eq!(b.column(HML).unwrap()[2], 3.98 * 0.01);
    }

    #[test]
    fn ff6_without_mom_names_mom() {
        let err = hand().require(ModelSpec::Ff6).unwrap_err();
        // factors are checked in spec order
        assert!(matches!(err, AttributionError::MissingFactor(ref f) if f == RMW));
        let mut b = hand();
        b.columns.insert(RMW.into(), vec![0.0; 5]);
        b.columns.insert(CMA.into(), vec![0.0; 5]);
        let err = b.require(ModelSpec::Ff6).unwrap_err();
        assert!(err.to_string().contains("MOM"));
    }

    #[test]
    fn export_import_round_trip() {
        let b = hand();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = BenchmarkReturns::ingest(buf.as_slice(), Units::Decimal, "hand").unwrap();
        assert_eq!(back.dates, b.dates);
        assert_eq!(back.columns, b.columns);
    }

    #[test]
    fn empty_cell_is_error() {
        let text = "date,MKT-RF,RF\n20210104,,0.0\n";
        assert!(BenchmarkReturns::ingest(text.as_bytes(), Units::Percent, "x").is_err());
    }

    fn synthetic_bench(n: usize) -> BenchmarkReturns {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..n).map(|i| start + chrono::Days::new(i as u64)).collect();
        let wave = |a: f64, b: f64| -> Vec<f64> {
            (0..n).map(|i| 0.01 * ((i as f64 * a).sin() + (i as f64 * b).cos() * 0.3)).collect()
        };
        let mut columns = BTreeMap::new();
        columns.insert(MKT_RF.to_string(), wave(0.7, 1.3));
        columns.insert(SMB.to_string(), wave(1.9, 0.4));
        columns.insert(HML.to_string(), wave(2.3, 2.9));
        columns.insert(RF.to_string(), vec![0.0001; n]);
        BenchmarkReturns {
            dates,
            columns,
            source: "synthetic".into(),
        }
    }

    #[test]
    fn self_regression_on_market() {
        let b = synthetic_bench(60);
        let port: Vec<(NaiveDate, f64)> = b
            .dates
            .iter()
            .zip(b.column(MKT_RF).unwrap())
            .map(|(d, r)| (*d, *r))
            .collect();
        let est = alpha_regression(&port, &b, ModelSpec::Capm, Financing::LongShort, NwLags::default()).unwrap();
        assert!(est.alpha.abs() < 1e-12);
        assert!((est.betas[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_alpha_is_mean() {
        let b = synthetic_bench(40);
        let port: Vec<(NaiveDate, f64)> =
            b.dates.iter().enumerate().map(|(i, d)| (*d, 0.001 * (i % 7) as f64)).collect();
        let est =
            alpha_regression(&port, &b, ModelSpec::InterceptOnly, Financing::LongShort, NwLags::Fixed(3)).unwrap();
        let mean = port.iter().map(|p| p.1).sum::<f64>() / 40.0;
        assert!((est.alpha - mean).abs() < 1e-15);
    }

    #[test]
    fn scaling_scales_alpha_keeps_t() {
        let b = synthetic_bench(80);
        let m = b.column(MKT_RF).unwrap();
        let port: Vec<(NaiveDate, f64)> = b
            .dates
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, 0.0005 + 0.4 * m[i] + 0.002 * ((i * 7 % 11) as f64 - 5.0) / 5.0))
            .collect();
        let scaled: Vec<(NaiveDate, f64)> = port.iter().map(|(d, r)| (*d, r * 3.0)).collect();
        let a = alpha_regression(&port, &b, ModelSpec::Ff3, Financing::LongShort, NwLags::default()).unwrap();
        let s = alpha_regression(&scaled, &b, ModelSpec::Ff3, Financing::LongShort, NwLags::default()).unwrap();
        assert!((s.alpha - 3.0 * a.alpha).abs() < 1e-14);
        assert!((s.nw_tstat - a.nw_tstat).abs() < 1e-9);
    }

    #[test]
    fn long_only_subtracts_rf() {
        let b = synthetic_bench(40);
        let port: Vec<(NaiveDate, f64)> = b.dates.iter().map(|d| (*d, 0.0001)).collect();
        let est =
            alpha_regression(&port, &b, ModelSpec::InterceptOnly, Financing::LongOnly, NwLags::Fixed(0)).unwrap();
        assert!(est.alpha.abs() < 1e-18);
    }

    #[test]
    fn zero_variance_factor_errors() {
        let mut b = synthetic_bench(40);
        b.columns.insert(SMB.into(), vec![0.002; 40]);
        let port: Vec<(NaiveDate, f64)> = b.dates.iter().enumerate().map(|(i, d)| (*d, i as f64 * 1e-4)).collect();
        let err = alpha_regression(&port, &b, ModelSpec::Ff3, Financing::LongShort, NwLags::default());
        assert!(matches!(err, Err(AttributionError::Collinear)));
    }
}
