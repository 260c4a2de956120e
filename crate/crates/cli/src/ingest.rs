//! `ingest`: parse the raw panel, apply the sample screens.

use std::io::Write;

use alphaloop_core::panel::{apply_screens, ingest_panel, write_panel_csv, ColumnMapping, IngestReport};
use alphaloop_core::report::table1;
use anyhow::{Context, Result};

use crate::context::RunContext;
use crate::files::{create, open, write_json, write_stamp_line, write_table, SCREENED_PANEL};
use crate::Common;

pub fn run(c: &Common) -> Result<()> {
    let ctx = RunContext::load(c)?;
    let path = &ctx.cfg.paths.panel;
    let (panel, report): (_, IngestReport) = ingest_panel(open(path)?, &ColumnMapping::default())
        .with_context(|| format!("cannot parse {}", path.display()))?;
    let (screened, screens) = apply_screens(&panel, &ctx.cfg.screen)?;

    let mut w = create(&ctx.out(SCREENED_PANEL))?;
    write_stamp_line(&mut w, &ctx.stamp)?;
    write_panel_csv(&mut w, &screened.to_observations())?;
    w.flush()?;
    write_table(&ctx, "table1.csv", &table1(&screens))?;
    write_json(&ctx, "ingest_report.json", &report)?;

    println!(
        "read {} rows, accepted {}, rejected {}; {} stocks and {} observations after screens",
        report.rows_read,
        report.rows_accepted,
        report.rejection_count(),
        screened.n_stocks(),
        screened.n_observations()
    );
    for r in report.rejected.iter().take(5) {
        eprintln!("rejected line {}: {}", r.line, r.reason);
    }
    Ok(())
}
