//! Fixtures shared by the benchmark targets.

use alphaloop_core::aggregation::FeatureMatrix;
use alphaloop_core::synth::{synth_panel, SynthConfig};
use alphaloop_core::{evaluate, parse_expr, Budget, Grid, Panel};

/// A synthetic panel of `n_stocks` names over `n_days` business days.
pub fn panel(n_stocks: usize, n_days: usize) -> Panel {
    let cfg = SynthConfig {
        n_stocks,
        n_days,
        ..SynthConfig::default()
    };
    synth_panel(&cfg).expect("synthetic panel").0
}

/// Factor values of `expr` on `panel`.
pub fn factor(panel: &Panel, expr: &str) -> Grid {
    let e = parse_expr(expr, &Budget::default()).expect("valid expression");
    evaluate(&e, panel).expect("evaluable expression").values
}

/// Feature matrix of the given expressions over every formation date.
pub fn features(panel: &Panel, exprs: &[&str]) -> FeatureMatrix {
    let grids: Vec<Grid> = exprs.iter().map(|e| factor(panel, e)).collect();
    let refs: Vec<&Grid> = grids.iter().collect();
    let formation: Vec<usize> = (0..panel.n_dates() - 1).collect();
    let names = exprs.iter().map(|e| e.to_string()).collect();
    FeatureMatrix::build(names, &refs, &panel.forward_returns(), &formation).expect("feature matrix")
}
