//! The closed discovery loop.
//!
//! Each round a [`HypothesisGenerator`] proposes expressions, which are
//! parsed, deduplicated by structural hash, evaluated on in-sample dates only,
//! gated, and folded into an [`AgentState`]. Every proposal produces one
//! [`ExperimentRecord`] in an append-only newline-delimited JSON log. The
//! generator RNG is seeded from `(seed, round)`, so a campaign is a pure
//! function of its config, seed and panel.

mod campaign;
mod generator;
mod llm;
mod log;
mod replay;
mod round;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::{GateError, GateThresholds, Verdict};
use crate::grammar::{Budget, FactorExpr, GrammarError};
use crate::metrics::{EvalConfig, EvalMetrics};

pub use campaign::{oos_report, resume_campaign, run_campaign, Campaign, CampaignOutput, OosRow};
pub use generator::{
    BaselineGenerator, GeneratorEvent, GeneratorOutput, HypothesisGenerator, NullGenerator,
    Proposal, Source,
};
pub use llm::{parse_reply, LlmConfig, LlmGenerator, API_KEY_ENV};
pub use log::{read_log, write_log, CandidateStatus, ExperimentRecord, LogEntry, LOG_SCHEMA};
pub use replay::ReplayGenerator;
pub use round::{round_seed, run_round, RoundContext, RoundOutcome, RECENT_CAP};

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("panel has no dates inside the in-sample window")]
    EmptyInSample,
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("log line {line}: {source}")]
    Log {
        line: usize,
        source: serde_json::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// In-sample and out-of-sample windows, both inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub is_start: NaiveDate,
    pub is_end: NaiveDate,
    pub oos_start: NaiveDate,
    pub oos_end: NaiveDate,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid preset date")
}

impl SplitSpec {
    pub fn new(
        is_start: NaiveDate,
        is_end: NaiveDate,
        oos_start: NaiveDate,
        oos_end: NaiveDate,
    ) -> Result<Self, DiscoveryError> {
        let s = Self {
            is_start,
            is_end,
            oos_start,
            oos_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DiscoveryError> {
        if self.is_start > self.is_end {
            return Err(DiscoveryError::InvalidSplit("is_start after is_end".into()));
        }
        if self.is_end >= self.oos_start {
            return Err(DiscoveryError::InvalidSplit(format!(
                "in-sample end {} must precede out-of-sample start {}",
                self.is_end, self.oos_start
            )));
        }
        if self.oos_start > self.oos_end {
            return Err(DiscoveryError::InvalidSplit("oos_start after oos_end".into()));
        }
        Ok(())
    }

    /// `oos-2021`: selection through 2020, OOS 2021-2024.
    /// `oos-2023`: selection through 2020, OOS 2023-2024.
    pub fn preset(name: &str) -> Option<SplitSpec> {
        match name {
            "oos-2021" => Some(SplitSpec {
                is_start: ymd(2004, 1, 1),
                is_end: ymd(2020, 12, 31),
                oos_start: ymd(2021, 1, 1),
                oos_end: ymd(2024, 12, 31),
            }),
            "oos-2023" => Some(SplitSpec {
                is_start: ymd(2004, 1, 1),
                is_end: ymd(2020, 12, 31),
                oos_start: ymd(2023, 1, 1),
                oos_end: ymd(2024, 12, 31),
            }),
            _ => None,
        }
    }

    /// A preset name or four comma-separated ISO dates.
    pub fn parse(text: &str) -> Result<SplitSpec, DiscoveryError> {
        if let Some(s) = Self::preset(text.trim()) {
            return Ok(s);
        }
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(DiscoveryError::InvalidSplit(format!(
                "{text:?} is neither a preset nor four dates"
            )));
        }
        let d: Vec<NaiveDate> = parts
            .iter()
            .map(|p| {
                NaiveDate::parse_from_str(p, "%Y-%m-%d")
                    .map_err(|e| DiscoveryError::InvalidSplit(format!("{p}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Self::new(d[0], d[1], d[2], d[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Probability of mutating a survivor instead of exploring.
    pub p_exploit: f64,
    /// Proposals requested per round.
    pub batch_size: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            p_exploit: 0.6,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub rounds: usize,
    pub seed: u64,
    /// Rounds a candidate may stay on hold before it is retired.
    pub hold_max_rounds: usize,
    /// Longest holding horizon used by the decay screen.
    pub decay_horizons: usize,
    pub nw_lags: usize,
    pub budget: Budget,
    pub eval: EvalConfig,
    pub gate: GateThresholds,
    pub generator: GeneratorConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            seed: 42,
            hold_max_rounds: 3,
            decay_horizons: 2,
            nw_lags: 5,
            budget: Budget::default(),
            eval: EvalConfig::default(),
            gate: GateThresholds::default(),
            generator: GeneratorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub expr: FactorExpr,
    pub hash: String,
    pub rationale: String,
    pub metrics: EvalMetrics,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldEntry {
    pub expr: FactorExpr,
    pub hash: String,
    pub rationale: String,
    pub metrics: EvalMetrics,
    /// Consecutive rounds on hold, including the round it was decided.
    pub rounds_held: usize,
}

/// A gated candidate, kept for the generator's context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecentOutcome {
    pub round: usize,
    pub expr: String,
    pub verdict: Verdict,
    pub ic_tstat: Option<f64>,
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub proposed: u32,
    pub promoted: u32,
    pub held: u32,
    pub retired: u32,
}

/// Everything the loop carries between rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Rounds completed.
    pub round: usize,
    pub seed: u64,
    /// Next log sequence number.
    pub next_seq: u64,
    pub library: Vec<LibraryEntry>,
    pub held: Vec<HeldEntry>,
    /// Structural hashes that may not be proposed again.
    pub retired: BTreeSet<String>,
    pub operator_tally: BTreeMap<String, Tally>,
    pub primitive_tally: BTreeMap<String, Tally>,
    /// Latest gated candidates, oldest first.
    pub recent: Vec<RecentOutcome>,
}

impl AgentState {
    pub fn new(seed: u64) -> Self {
        Self {
            round: 0,
            seed,
            next_seq: 0,
            library: Vec::new(),
            held: Vec::new(),
            retired: BTreeSet::new(),
            operator_tally: BTreeMap::new(),
            primitive_tally: BTreeMap::new(),
            recent: Vec::new(),
        }
    }

    /// True when `hash` is in the library, on hold, or retired.
    pub fn is_known(&self, hash: &str) -> bool {
        self.retired.contains(hash)
            || self.library.iter().any(|e| e.hash == hash)
            || self.held.iter().any(|e| e.hash == hash)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DiscoveryError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_order_enforced() {
        let a = ymd(2020, 1, 1);
        let b = ymd(2020, 12, 31);
        assert!(SplitSpec::new(a, b, b, ymd(2021, 6, 1)).is_err());
        assert!(SplitSpec::new(a, b, ymd(2021, 1, 1), ymd(2021, 6, 1)).is_ok());
    }

    #[test]
    fn split_parse() {
        assert_eq!(SplitSpec::parse("oos-2023").unwrap().oos_start, ymd(2023, 1, 1));
        let s = SplitSpec::parse("2010-01-01, 2015-12-31, 2016-01-01, 2018-12-31").unwrap();
        assert_eq!(s.is_end, ymd(2015, 12, 31));
        assert!(SplitSpec::parse("2010-01-01,2015-12-31").is_err());
    }

    #[test]
    fn empty_state_round_trips() {
        let s = AgentState::new(7);
        assert_eq!(AgentState::from_json(&s.to_json()).unwrap(), s);
    }
}
