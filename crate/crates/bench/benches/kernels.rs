use std::hint::black_box;

use alphaloop_bench::{factor, features, panel};
use alphaloop_core::aggregation::{fit_gbdt, fit_linear, GbdtParams};
use alphaloop_core::backtest::{decile_backtest, BacktestReport, CostModel};
use alphaloop_core::metrics::{max_drawdown, rank_ic, EvalConfig, Evaluator};
use alphaloop_core::{evaluate, parse_expr, Budget};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cross_section(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("rank_ic");
    for n in [100usize, 1000, 3000] {
        let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| rank_ic(black_box(&s), black_box(&r), 10))
        });
    }
    group.finish();

    let r: Vec<f64> = (0..2500).map(|_| 0.01 * (rng.random::<f64>() - 0.5)).collect();
    c.bench_function("max_drawdown/2500", |b| b.iter(|| max_drawdown(black_box(&r))));
}

fn factor_pipeline(c: &mut Criterion) {
    let p = panel(200, 1000);
    let expr = parse_expr("cs_rank(div(rolling_mean(volume, 5), rolling_mean(volume, 20)))", &Budget::default()).unwrap();
    c.bench_function("evaluate_expr/200x1000", |b| b.iter(|| evaluate(black_box(&expr), &p).unwrap()));

    let dates = p.dates();
    let ev = Evaluator::new(&p, EvalConfig::default(), dates[0], dates[dates.len() - 1]);
    let scores = factor(&p, "vol_growth");
    c.bench_function("evaluator/200x1000", |b| b.iter(|| ev.evaluate(black_box(&scores))));

    let fwd = p.forward_returns();
    let window: Vec<usize> = (0..p.n_dates() - 1).collect();
    c.bench_function("decile_backtest/200x1000", |b| {
        b.iter(|| {
            let bt = decile_backtest(black_box(&scores), &fwd, &window, 10).unwrap();
            BacktestReport::build(&bt, &fwd, dates, CostModel::default())
        })
    });
}

fn aggregation(c: &mut Criterion) {
    let p = panel(100, 500);
    let fm = features(&p, &["vol_growth", "spread", "rvol20", "vol_ratio", "cs_rank(price)"]);
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("linear", |b| b.iter(|| fit_linear(black_box(&fm), 1.0).unwrap()));
    for n_trees in [20usize, 100] {
        let params = GbdtParams {
            n_trees,
            ..GbdtParams::default()
        };
        group.bench_with_input(BenchmarkId::new("gbdt", n_trees), &params, |b, params| {
            b.iter(|| fit_gbdt(black_box(&fm), params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, cross_section, factor_pipeline, aggregation);
criterion_main!(benches);
