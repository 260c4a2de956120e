//! Reading and writing the files passed between subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use alphaloop_core::discovery::LibraryEntry;
use alphaloop_core::panel::{build_primitives, ingest_panel, ColumnMapping};
use alphaloop_core::report::{Stamp, Table};
use alphaloop_core::Panel;
use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::context::RunContext;

pub const SCREENED_PANEL: &str = "panel_screened.csv";
pub const LIBRARY: &str = "library.json";
pub const STATE: &str = "state.json";
pub const LOG: &str = "experiments.jsonl";
pub const FACTOR_RETURNS: &str = "factor_returns.csv";
pub const COMPOSITE_RETURNS: &str = "composite_returns.csv";

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(BufReader::new(f))
}

pub fn write_table(ctx: &RunContext, name: &str, table: &Table) -> Result<()> {
    let path = ctx.out(name);
    let mut w = create(&path)?;
    table.write(&mut w, &ctx.stamp)?;
    w.flush()?;
    Ok(())
}

/// SVG with the stamp as a leading XML comment.
pub fn write_svg(ctx: &RunContext, name: &str, svg: &str) -> Result<()> {
    let mut w = create(&ctx.out(name))?;
    writeln!(w, "<!-- {} -->", ctx.stamp.line().trim_start_matches("# "))?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}

/// JSON outputs carry the stamp next to their payload.
#[derive(Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    pub seed: u64,
    pub data: T,
}

pub fn write_json<T: Serialize>(ctx: &RunContext, name: &str, data: &T) -> Result<()> {
    let v = Stamped {
        config_hash: ctx.stamp.config_hash.clone(),
        seed: ctx.stamp.seed,
        data,
    };
    let mut w = create(&ctx.out(name))?;
    serde_json::to_writer_pretty(&mut w, &v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let v: Stamped<T> =
        serde_json::from_reader(open(path)?).with_context(|| format!("invalid {}", path.display()))?;
    Ok(v.data)
}

pub fn write_stamp_line<W: Write>(w: &mut W, stamp: &Stamp) -> Result<()> {
    writeln!(w, "{}", stamp.line())?;
    Ok(())
}

/// The screened panel written by `ingest`, with primitives built.
pub fn load_panel(ctx: &RunContext) -> Result<Panel> {
    let path = ctx.out(SCREENED_PANEL);
    if !path.exists() {
        bail!("{} not found; run `alphaloop ingest` first", path.display());
    }
    let (panel, _) = ingest_panel(open(&path)?, &ColumnMapping::default())
        .with_context(|| format!("cannot parse {}", path.display()))?;
    Ok(build_primitives(panel))
}

/// The promoted library written by `discover`.
pub fn load_library(ctx: &RunContext) -> Result<Vec<LibraryEntry>> {
    let path = ctx.out(LIBRARY);
    if !path.exists() {
        bail!("{} not found; run `alphaloop discover` first", path.display());
    }
    read_json(&path)
}

/// Display names `F1..Fk` in library order.
pub fn factor_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("F{i}")).collect()
}

/// A dated series table as written by [`alphaloop_core::report::series_table`].
pub struct SeriesFile {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl SeriesFile {
    pub fn read(path: &Path) -> Result<SeriesFile> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?);
        let header = rdr.headers()?.clone();
        let mut columns: Vec<(String, Vec<f64>)> =
            header.iter().skip(1).map(|h| (h.to_string(), Vec::new())).collect();
        let mut dates = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .with_context(|| format!("{} row {}: bad date", path.display(), i + 1))?;
            dates.push(date);
            for (j, (_, col)) in columns.iter_mut().enumerate() {
                let cell = rec.get(j + 1).unwrap_or("NA");
                col.push(if cell == "NA" {
                    f64::NAN
                } else {
                    cell.parse()
                        .with_context(|| format!("{} row {}: bad value {cell:?}", path.display(), i + 1))?
                });
            }
        }
        Ok(SeriesFile { dates, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// `(date, value)` pairs of one column.
    pub fn dated(&self, values: &[f64]) -> Vec<(NaiveDate, f64)> {
        self.dates.iter().copied().zip(values.iter().copied()).collect()
    }
}
