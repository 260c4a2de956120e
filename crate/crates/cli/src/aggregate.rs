//! `aggregate`: walk-forward combination of the library into one score.
//!
//! The equal-weight, linear and GBDT composites are all fitted so that they
//! can be compared on one chart; the configured model drives the tables.

use std::io::Write;

use alphaloop_core::aggregation::{
    feature_importance, walk_forward, FeatureMatrix, Model, ModelKind, WalkForward,
};
use alphaloop_core::backtest::{decile_backtest, BacktestReport};
use alphaloop_core::config::ModelChoice;
use alphaloop_core::metrics::{EvalMetrics, Evaluator};
use alphaloop_core::report::{cumulative, line_chart, series_table, table3, table5, table9, Series, Table};
use alphaloop_core::{evaluate, parse_expr, Grid, Panel};
use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::backtest::{align, fmt};
use crate::context::RunContext;
use crate::files::{create, factor_names, load_library, load_panel, write_json, write_stamp_line, write_svg, write_table, COMPOSITE_RETURNS};
use crate::Common;

const CHOICES: [ModelChoice; 3] = [ModelChoice::Equal, ModelChoice::Linear, ModelChoice::Gbdt];

struct Fitted {
    label: String,
    wf: WalkForward,
    scores: Grid,
    metrics: EvalMetrics,
    report: BacktestReport,
}

#[derive(Serialize)]
struct SegmentRow {
    model: String,
    train_start: Option<String>,
    train_end: Option<String>,
    predict_start: String,
    predict_end: String,
    n_train_rows: usize,
    error: Option<String>,
}

fn feature_matrix(panel: &Panel, names: Vec<String>, grids: &[Grid]) -> Result<FeatureMatrix> {
    let formation: Vec<usize> = (0..panel.n_dates().saturating_sub(1)).collect();
    let refs: Vec<&Grid> = grids.iter().collect();
    Ok(FeatureMatrix::build(names, &refs, &panel.forward_returns(), &formation)?)
}

fn fit(ctx: &RunContext, panel: &Panel, ev: &Evaluator, fm: &FeatureMatrix, kind: &ModelKind, label: String) -> Result<Fitted> {
    let wf = walk_forward(fm, &ctx.cfg.aggregation.walk_forward, kind)
        .with_context(|| format!("{label} walk-forward"))?;
    let scores = fm.to_grid(&wf.scores);
    let metrics = ev.evaluate_normalized(&scores).metrics;
    let bt = decile_backtest(&scores, ev.forward_returns(), ev.window(), ev.config().quantiles)?;
    let report = BacktestReport::build(&bt, ev.forward_returns(), panel.dates(), ctx.cfg.cost);
    Ok(Fitted {
        label,
        wf,
        scores,
        metrics,
        report,
    })
}

fn baseline_grids(ctx: &RunContext, panel: &Panel) -> Result<Option<Vec<Grid>>> {
    let Some(path) = &ctx.cfg.paths.baseline_factors else {
        return Ok(None);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut grids = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let expr = parse_expr(line, &ctx.cfg.campaign.budget)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        grids.push(evaluate(&expr, panel)?.values);
    }
    if grids.is_empty() {
        bail!("{} contains no expressions", path.display());
    }
    Ok(Some(grids))
}

pub fn run(c: &Common) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let agg = &ctx.cfg.aggregation;
    let panel = load_panel(&ctx)?;
    let library = load_library(&ctx)?;
    if library.is_empty() {
        bail!("the factor library is empty; nothing to aggregate");
    }
    let names = factor_names(library.len());
    let grids: Vec<Grid> = library
        .iter()
        .map(|e| evaluate(&e.expr, &panel).map(|s| s.values))
        .collect::<Result<_, _>>()?;
    let fm = feature_matrix(&panel, names, &grids)?;
    let ev = Evaluator::new(&panel, ctx.cfg.campaign.eval.clone(), ctx.split.oos_start, ctx.split.oos_end);

    let mut fitted = Vec::new();
    for choice in CHOICES {
        let kind = agg.kind(choice);
        fitted.push(fit(&ctx, &panel, &ev, &fm, &kind, kind.label().to_string())?);
    }
    let chosen_kind = agg.kind(agg.model);
    if let Some(grids) = baseline_grids(&ctx, &panel)? {
        let bfm = feature_matrix(&panel, factor_names(grids.len()), &grids)?;
        fitted.push(fit(&ctx, &panel, &ev, &bfm, &chosen_kind, format!("baseline_{}", chosen_kind.label()))?);
    }
    let chosen = fitted
        .iter()
        .find(|f| f.label == chosen_kind.label())
        .expect("every model choice is fitted");

    write_table(
        &ctx,
        "table5.csv",
        &table5(&format!("Composite ({})", chosen.label), &chosen.report.gross_summary, &chosen.report.quarterly),
    )?;
    write_table(&ctx, "table9.csv", &table9(&chosen.report.quarterly))?;
    let comparison: Vec<(String, EvalMetrics)> = fitted.iter().map(|f| (f.label.clone(), f.metrics.clone())).collect();
    write_table(&ctx, "model_comparison.csv", &table3(&comparison))?;

    let r = &chosen.report;
    let columns = vec![
        ("long_short".to_string(), r.gross.clone()),
        ("long_only".to_string(), r.long_only().to_vec()),
        ("turnover".to_string(), r.turnover.clone()),
        ("net".to_string(), r.net.clone()),
    ];
    write_table(&ctx, COMPOSITE_RETURNS, &series_table(&r.dates, &columns))?;
    write_scores(&ctx, &panel, &ev, &chosen.scores)?;

    let axis = &fitted[0].report.dates;
    let curves: Vec<Series> = fitted
        .iter()
        .map(|f| Series {
            label: f.label.clone(),
            values: align(axis, &f.report.dates, &cumulative(&f.report.gross)),
        })
        .collect();
    write_svg(&ctx, "models.svg", &line_chart("Cumulative long-short return by model", axis, &curves))?;

    let dates = panel.dates();
    let mut segments = Vec::new();
    for f in &fitted {
        for s in &f.wf.segments {
            let at = |p: usize| dates[fm.dates[p]].to_string();
            segments.push(SegmentRow {
                model: f.label.clone(),
                train_start: (f.label != "equal_weight").then(|| at(s.train.start)),
                train_end: (f.label != "equal_weight").then(|| at(s.train.end - 1)),
                predict_start: at(s.predict.start),
                predict_end: at(s.predict.end - 1),
                n_train_rows: s.n_train_rows,
                error: s.error.clone(),
            });
        }
    }
    write_json(&ctx, "segments.json", &segments)?;

    if let Some(model) = chosen.wf.segments.iter().rev().find_map(|s| s.model.as_ref()) {
        std::fs::write(ctx.out("model.json"), model.to_json())?;
        if let Model::Gbdt(g) = model {
            let mut t = Table::new(&["Feature", "Expression", "Gain", "Splits", "Gain Share (%)"]);
            for imp in feature_importance(g) {
                let idx: usize = imp.name[1..].parse().expect("factor names are F<n>");
                t.push(vec![
                    imp.name.clone(),
                    library[idx - 1].expr.canonical(),
                    format!("{:.6}", imp.gain),
                    imp.frequency.to_string(),
                    format!("{:.2}", 100.0 * imp.gain_share),
                ]);
            }
            write_table(&ctx, "importance.csv", &t)?;
        }
    }
    let failed = chosen.wf.segments.iter().filter(|s| s.error.is_some()).count();
    if failed > 0 {
        eprintln!("warning: {failed} {} segments could not be fitted; see segments.json", chosen.label);
    }

    for f in &fitted {
        println!(
            "{:<16} IC {} Sharpe {}",
            f.label,
            fmt(f.metrics.mean_ic, 4),
            fmt(f.metrics.sharpe, 2)
        );
    }
    Ok(())
}

/// Out-of-sample composite scores in long format.
fn write_scores(ctx: &RunContext, panel: &Panel, ev: &Evaluator, scores: &Grid) -> Result<()> {
    let mut w = create(&ctx.out("composite_scores.csv"))?;
    write_stamp_line(&mut w, &ctx.stamp)?;
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record(["date", "stock_id", "score"])?;
    for &d in ev.window() {
        let date = panel.dates()[d].to_string();
        for (s, id) in panel.stock_ids().iter().enumerate() {
            let v = scores.get(d, s);
            if v.is_finite() {
                csv.write_record([date.as_str(), id.as_str(), &v.to_string()])?;
            }
        }
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    Ok(())
}
