//! `attribute`: alphas of the factor and composite return series against
//! the CAPM and Fama-French benchmark models.

use alphaloop_core::attribution::{alpha_regression, AlphaEstimate, BenchmarkReturns, Financing, ModelSpec};
use alphaloop_core::report::alpha_table;
use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::Serialize;

use crate::context::RunContext;
use crate::files::{open, write_json, write_table, SeriesFile, COMPOSITE_RETURNS, FACTOR_RETURNS};
use crate::Common;

#[derive(Serialize)]
struct Attribution {
    benchmark: String,
    factors: Vec<(String, Vec<AlphaEstimate>)>,
    portfolios: Vec<(String, Vec<AlphaEstimate>)>,
}

fn estimates(name: &str, series: &[(NaiveDate, f64)], bench: &BenchmarkReturns, financing: Financing, ctx: &RunContext) -> Vec<AlphaEstimate> {
    ModelSpec::TABLE
        .iter()
        .filter_map(|&spec| match alpha_regression(series, bench, spec, financing, ctx.cfg.attribution.lags()) {
            Ok(e) => Some(e),
            Err(e) => {
                eprintln!("warning: {name} {}: {e}", spec.label());
                None
            }
        })
        .collect()
}

pub fn run(c: &Common) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let Some(bench_path) = ctx.cfg.paths.benchmark.clone() else {
        bail!("paths.benchmark is not set in the config");
    };
    let bench = BenchmarkReturns::ingest(open(&bench_path)?, ctx.cfg.attribution.units, &bench_path.display().to_string())
        .with_context(|| format!("cannot parse {}", bench_path.display()))?;

    let mut out = Attribution {
        benchmark: bench.source.clone(),
        factors: Vec::new(),
        portfolios: Vec::new(),
    };
    let factor_path = ctx.out(FACTOR_RETURNS);
    if factor_path.exists() {
        let f = SeriesFile::read(&factor_path)?;
        for (name, values) in &f.columns {
            out.factors.push((name.clone(), estimates(name, &f.dated(values), &bench, Financing::LongShort, &ctx)));
        }
    } else {
        eprintln!("warning: {} not found; run `alphaloop backtest` for the factor table", factor_path.display());
    }
    let comp_path = ctx.out(COMPOSITE_RETURNS);
    if comp_path.exists() {
        let f = SeriesFile::read(&comp_path)?;
        for (label, column, financing) in [
            ("Long-Short", "long_short", Financing::LongShort),
            ("Long-Only", "long_only", Financing::LongOnly),
        ] {
            let values = f.column(column).with_context(|| format!("{} has no {column} column", comp_path.display()))?;
            out.portfolios.push((label.to_string(), estimates(label, &f.dated(values), &bench, financing, &ctx)));
        }
    } else {
        eprintln!("warning: {} not found; run `alphaloop aggregate` for the portfolio table", comp_path.display());
    }
    if out.factors.is_empty() && out.portfolios.is_empty() {
        bail!("no return series to attribute");
    }

    write_table(&ctx, "table4.csv", &alpha_table("Factor", &out.factors))?;
    write_table(&ctx, "table6.csv", &alpha_table("Portfolio", &out.portfolios))?;
    write_json(&ctx, "attribution.json", &out)?;
    for (name, ests) in out.portfolios.iter().chain(&out.factors) {
        if let Some(e) = ests.iter().find(|e| e.spec == ModelSpec::Ff6) {
            println!("{name:<12} FF6 alpha {:.2}% (t {:.2})", 100.0 * e.alpha_annualized, e.nw_tstat);
        }
    }
    Ok(())
}
