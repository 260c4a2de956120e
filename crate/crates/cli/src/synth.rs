//! `synth`: a synthetic raw panel and matching benchmark factor file.

use std::io::Write;

use alphaloop_core::attribution::Units;
use alphaloop_core::panel::{write_panel_csv, COL_MKT_VW};
use alphaloop_core::synth::{generate, synth_benchmark};
use alphaloop_core::Panel;
use anyhow::{Context, Result};

use crate::context::RunContext;
use crate::files::{create, write_stamp_line};
use crate::Common;

pub fn run(c: &Common) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let cfg = &ctx.cfg;
    let out = generate(&cfg.synth)?;

    let panel_path = &cfg.paths.panel;
    if let Some(dir) = panel_path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut w = create(panel_path)?;
    write_stamp_line(&mut w, &ctx.stamp)?;
    write_panel_csv(&mut w, &out.observations)?;
    w.flush()?;

    let panel = Panel::from_observations(out.observations)?;
    let mut bench = synth_benchmark(panel.dates(), &panel.market_series(COL_MKT_VW), cfg.synth.seed);
    if cfg.attribution.units == Units::Percent {
        for col in bench.columns.values_mut() {
            col.iter_mut().for_each(|v| *v *= 100.0);
        }
    }
    let bench_path = cfg.paths.benchmark.clone().unwrap_or_else(|| ctx.out("benchmark.csv"));
    let mut w = create(&bench_path)?;
    write_stamp_line(&mut w, &ctx.stamp)?;
    bench.write_csv(&mut w)?;
    w.flush()?;

    println!(
        "wrote {} ({} stocks, {} dates) and {}",
        panel_path.display(),
        panel.n_stocks(),
        panel.n_dates(),
        bench_path.display()
    );
    Ok(())
}
