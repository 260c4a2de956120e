//! `backtest`: out-of-sample evaluation of the frozen library and of its
//! equal-weight composite.

use std::collections::BTreeSet;

use alphaloop_core::aggregation::{equal_weight_composite, FeatureMatrix};
use alphaloop_core::backtest::{decile_backtest, multi_horizon, BacktestReport, HorizonStat};
use alphaloop_core::metrics::{normalize_scores, EvalMetrics, Evaluator};
use alphaloop_core::report::{cumulative, line_chart, series_table, table3, table7, table8, Series, Table};
use alphaloop_core::{evaluate, Grid, Panel};
use anyhow::Result;
use chrono::NaiveDate;
use serde::Serialize;

use crate::context::RunContext;
use crate::files::{factor_names, load_library, load_panel, write_json, write_svg, write_table, FACTOR_RETURNS};
use crate::Common;

/// Holding horizons reported in the decay table.
const MAX_HORIZON: usize = 10;

const COMPOSITE: &str = "Composite (EW)";

#[derive(Serialize)]
struct FactorRow {
    name: String,
    expr: String,
    rationale: String,
    round: usize,
    in_sample: EvalMetrics,
    out_of_sample: EvalMetrics,
    monotonicity: Option<f64>,
}

struct Evaluated {
    metrics: EvalMetrics,
    report: BacktestReport,
    horizons: Vec<HorizonStat>,
}

fn evaluate_scores(ctx: &RunContext, panel: &Panel, ev: &Evaluator, scores: &Grid) -> Result<Evaluated> {
    let metrics = ev.evaluate_normalized(scores).metrics;
    let fwd = ev.forward_returns();
    let bt = decile_backtest(scores, fwd, ev.window(), ev.config().quantiles)?;
    let horizons = multi_horizon(&bt.assignments, &bt.dates, fwd, MAX_HORIZON, ctx.cfg.campaign.nw_lags);
    let report = BacktestReport::build(&bt, fwd, panel.dates(), ctx.cfg.cost);
    Ok(Evaluated {
        metrics,
        report,
        horizons,
    })
}

/// Values of `(dates, values)` on `axis`, NaN where absent.
pub fn align(axis: &[NaiveDate], dates: &[NaiveDate], values: &[f64]) -> Vec<f64> {
    axis.iter()
        .map(|d| dates.binary_search(d).map_or(f64::NAN, |i| values[i]))
        .collect()
}

pub fn run(c: &Common) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let panel = load_panel(&ctx)?;
    let library = load_library(&ctx)?;
    let names = factor_names(library.len());
    let eval_cfg = ctx.cfg.campaign.eval.clone();
    let ev = Evaluator::new(&panel, eval_cfg.clone(), ctx.split.oos_start, ctx.split.oos_end);

    if library.is_empty() {
        eprintln!("warning: the factor library is empty; writing empty tables");
        write_table(&ctx, "table3.csv", &table3(&[]))?;
        write_table(&ctx, "table8.csv", &table8(&[]))?;
        write_table(&ctx, FACTOR_RETURNS, &series_table(&[], &[]))?;
        return Ok(());
    }

    let mut raw = Vec::with_capacity(library.len());
    let mut rows = Vec::new();
    let mut evaluated = Vec::new();
    for (name, entry) in names.iter().zip(&library) {
        let series = evaluate(&entry.expr, &panel)?;
        let scores = normalize_scores(&series.values, &eval_cfg);
        let e = evaluate_scores(&ctx, &panel, &ev, &scores)?;
        rows.push(FactorRow {
            name: name.clone(),
            expr: entry.expr.canonical(),
            rationale: entry.rationale.clone(),
            round: entry.round,
            in_sample: entry.metrics.clone(),
            out_of_sample: e.metrics.clone(),
            monotonicity: e.report.monotonicity,
        });
        evaluated.push(e);
        raw.push(series.values);
    }

    let grids: Vec<&Grid> = raw.iter().collect();
    let fm = FeatureMatrix::build(names.clone(), &grids, ev.forward_returns(), ev.window())?;
    let composite = fm.to_grid(&equal_weight_composite(&fm));
    let comp = evaluate_scores(&ctx, &panel, &ev, &composite)?;

    let mut t3: Vec<(String, EvalMetrics)> =
        names.iter().cloned().zip(evaluated.iter().map(|e| e.metrics.clone())).collect();
    t3.push((COMPOSITE.to_string(), comp.metrics.clone()));
    write_table(&ctx, "table3.csv", &table3(&t3))?;
    write_table(&ctx, "table7.csv", &table7(&comp.report))?;
    let mut t8 = vec![(COMPOSITE.to_string(), comp.horizons.clone())];
    t8.extend(names.iter().cloned().zip(evaluated.iter().map(|e| e.horizons.clone())));
    write_table(&ctx, "table8.csv", &table8(&t8))?;

    let mut factors = Table::new(&["Factor", "Expression", "Round", "Rationale"]);
    for r in &rows {
        factors.push(vec![r.name.clone(), r.expr.clone(), r.round.to_string(), r.rationale.clone()]);
    }
    write_table(&ctx, "factors.csv", &factors)?;
    write_json(&ctx, "factor_report.json", &rows)?;

    let axis: Vec<NaiveDate> = evaluated
        .iter()
        .flat_map(|e| e.report.dates.iter().copied())
        .chain(comp.report.dates.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let gross: Vec<(String, Vec<f64>)> = names
        .iter()
        .zip(&evaluated)
        .map(|(n, e)| (n.clone(), align(&axis, &e.report.dates, &e.report.gross)))
        .collect();
    write_table(&ctx, FACTOR_RETURNS, &series_table(&axis, &gross))?;

    let mut curves: Vec<Series> = names
        .iter()
        .zip(&evaluated)
        .map(|(n, e)| Series {
            label: n.clone(),
            values: align(&axis, &e.report.dates, &cumulative(&e.report.gross)),
        })
        .collect();
    curves.push(Series {
        label: COMPOSITE.into(),
        values: align(&axis, &comp.report.dates, &cumulative(&comp.report.gross)),
    });
    write_svg(&ctx, "factors.svg", &line_chart("Cumulative long-short return", &axis, &curves))?;

    let deciles: Vec<Series> = comp
        .report
        .deciles
        .iter()
        .enumerate()
        .map(|(b, s)| Series {
            label: format!("D{}", b + 1),
            values: cumulative(s),
        })
        .collect();
    write_svg(
        &ctx,
        "deciles.svg",
        &line_chart("Composite decile portfolios", &comp.report.dates, &deciles),
    )?;

    println!(
        "{} factors evaluated out of sample; composite IC {} Sharpe {}",
        library.len(),
        fmt(comp.metrics.mean_ic, 4),
        fmt(comp.metrics.sharpe, 2)
    );
    Ok(())
}

pub fn fmt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.digits$}"))
}
