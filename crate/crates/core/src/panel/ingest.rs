//! Delimited-text ingest.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Panel, PanelError, RawObservation};

/// Maps canonical field names to header names in the source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub date: String,
    pub stock_id: String,
    pub ret: String,
    pub price: String,
    pub volume: String,
    pub exchange_code: String,
    pub share_code: String,
    pub market_ret_vw: String,
    pub market_ret_sp: String,
    pub bid: String,
    pub ask: String,
    pub delimiter: char,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date: "date".into(),
            stock_id: "stock_id".into(),
            ret: "ret".into(),
            price: "price".into(),
            volume: "volume".into(),
            exchange_code: "exchange_code".into(),
            share_code: "share_code".into(),
            market_ret_vw: "market_ret_vw".into(),
            market_ret_sp: "market_ret_sp".into(),
            bid: "bid".into(),
            ask: "ask".into(),
            delimiter: ',',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rejected: Vec<RejectedRow>,
    /// Rows whose price was vendor-coded negative and stored as its absolute value.
    pub negative_prices: usize,
}

impl IngestReport {
    pub fn rejection_count(&self) -> usize {
        self.rejected.len()
    }
}

struct Indices {
    date: usize,
    stock: usize,
    ret: usize,
    price: usize,
    volume: usize,
    exchange: usize,
    share: usize,
    mkt_vw: usize,
    mkt_sp: usize,
    bid: Option<usize>,
    ask: Option<usize>,
}

/// Reads a header-led delimited stream into a [`Panel`].
///
/// Lines starting with `#` are treated as comments. Rows that fail to parse,
/// or carry a negative volume, are rejected and listed in the report; they
/// never reach the panel.
pub fn ingest_panel<R: Read>(
    source: R,
    mapping: &ColumnMapping,
) -> Result<(Panel, IngestReport), PanelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter as u8)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let required = [
        &mapping.date,
        &mapping.stock_id,
        &mapping.ret,
        &mapping.price,
        &mapping.volume,
        &mapping.exchange_code,
        &mapping.share_code,
        &mapping.market_ret_vw,
        &mapping.market_ret_sp,
    ];
    let missing: Vec<String> = required
        .iter()
        .filter(|n| find(n).is_none())
        .map(|n| n.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(PanelError::MissingColumns(missing));
    }
    let idx = Indices {
        date: find(&mapping.date).unwrap(),
        stock: find(&mapping.stock_id).unwrap(),
        ret: find(&mapping.ret).unwrap(),
        price: find(&mapping.price).unwrap(),
        volume: find(&mapping.volume).unwrap(),
        exchange: find(&mapping.exchange_code).unwrap(),
        share: find(&mapping.share_code).unwrap(),
        mkt_vw: find(&mapping.market_ret_vw).unwrap(),
        mkt_sp: find(&mapping.market_ret_sp).unwrap(),
        bid: find(&mapping.bid),
        ask: find(&mapping.ask),
    };

    let mut report = IngestReport::default();
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        report.rows_read += 1;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&rec, &idx) {
            Ok(o) => {
                if o.price < 0.0 {
                    report.negative_prices += 1;
                }
                obs.push(o);
            }
            Err(reason) => report.rejected.push(RejectedRow { line, reason }),
        }
    }
    report.rows_accepted = obs.len();
    let panel = Panel::from_observations(obs)?;
    Ok((panel, report))
}

fn parse_row(rec: &csv::StringRecord, idx: &Indices) -> Result<RawObservation, String> {
    let field = |i: usize, name: &str| rec.get(i).ok_or_else(|| format!("missing field {name}"));
    let num = |i: usize, name: &str| -> Result<f64, String> {
        let s = field(i, name)?;
        let v: f64 = s.parse().map_err(|_| format!("unparseable {name} {s:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {name}"))
        }
    };
    let int = |i: usize, name: &str| -> Result<i32, String> {
        let s = field(i, name)?;
        s.parse().map_err(|_| format!("unparseable {name} {s:?}"))
    };
    let quote = |i: Option<usize>, name: &str| -> Result<Option<f64>, String> {
        match i.and_then(|i| rec.get(i)) {
            None | Some("") => Ok(None),
            Some(_) => num(i.unwrap(), name).map(Some),
        }
    };

    let date_s = field(idx.date, "date")?;
    let date = NaiveDate::parse_from_str(date_s, "%Y-%m-%d")
        .map_err(|_| format!("unparseable date {date_s:?}"))?;
    let stock_id = field(idx.stock, "stock_id")?;
    if stock_id.is_empty() {
        return Err("empty stock_id".into());
    }
    let volume = num(idx.volume, "volume")?;
    if volume < 0.0 {
        return Err(format!("negative volume {volume}"));
    }
    Ok(RawObservation {
        date,
        stock_id: stock_id.to_string(),
        ret: num(idx.ret, "ret")?,
        price: num(idx.price, "price")?,
        volume,
        exchange_code: int(idx.exchange, "exchange_code")?,
        share_code: int(idx.share, "share_code")?,
        market_ret_vw: num(idx.mkt_vw, "market_ret_vw")?,
        market_ret_sp: num(idx.mkt_sp, "market_ret_sp")?,
        bid: quote(idx.bid, "bid")?,
        ask: quote(idx.ask, "ask")?,
    })
}

/// Writes observations in the default column layout, one row per observation.
pub fn write_panel_csv<W: Write>(out: W, rows: &[RawObservation]) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "date",
        "stock_id",
        "ret",
        "price",
        "volume",
        "exchange_code",
        "share_code",
        "market_ret_vw",
        "market_ret_sp",
        "bid",
        "ask",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for o in rows {
        w.write_record([
            o.date.format("%Y-%m-%d").to_string(),
            o.stock_id.clone(),
            o.ret.to_string(),
            o.price.to_string(),
            o.volume.to_string(),
            o.exchange_code.to_string(),
            o.share_code.to_string(),
            o.market_ret_vw.to_string(),
            o.market_ret_sp.to_string(),
            opt(o.bid),
            opt(o.ask),
        ])?;
    }
    w.flush()?;
    Ok(())
}
