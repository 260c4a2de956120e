//! Closed-loop factor discovery and evaluation.
//!
//! The crate is organised as a pipeline: [`panel`] ingests and screens
//! stock-date records, [`grammar`] turns symbolic expressions into factor
//! series, [`metrics`] scores them under a fixed protocol, [`gate`] decides
//! promotion, [`discovery`] runs the propose-evaluate-update loop,
//! [`aggregation`] combines survivors, and [`backtest`] / [`attribution`]
//! report portfolio performance.

pub mod aggregation;
pub mod attribution;
pub mod backtest;
pub mod config;
pub mod discovery;
pub mod gate;
pub mod grammar;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod panel;
pub mod stats;
pub mod synth;

pub use grammar::{evaluate, parse_expr, Budget, FactorExpr, FactorSeries, GrammarError};
pub use grid::Grid;
pub use panel::{Panel, PanelError, RawObservation};
