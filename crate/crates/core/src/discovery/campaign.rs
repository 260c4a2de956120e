//! Multi-round campaigns, checkpoint resume, and the post-freeze OOS report.

use serde::{Deserialize, Serialize};

use super::generator::HypothesisGenerator;
use super::log::LogEntry;
use super::round::{run_round, RoundContext};
use super::{AgentState, CampaignConfig, DiscoveryError, LibraryEntry, SplitSpec};
use crate::backtest::decile_backtest;
use crate::grammar::evaluate;
use crate::metrics::{normalize_scores, EvalConfig, EvalMetrics, Evaluator};
use crate::panel::Panel;

pub struct Campaign {
    ctx: RoundContext,
    rounds: usize,
    pub state: AgentState,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub state: AgentState,
    pub log: Vec<LogEntry>,
}

impl Campaign {
    pub fn new(panel: &Panel, split: &SplitSpec, cfg: &CampaignConfig) -> Result<Self, DiscoveryError> {
        Self::resume(panel, split, cfg, AgentState::new(cfg.seed), Vec::new())
    }

    /// Continues from a saved state and the log written so far.
    pub fn resume(
        panel: &Panel,
        split: &SplitSpec,
        cfg: &CampaignConfig,
        state: AgentState,
        log: Vec<LogEntry>,
    ) -> Result<Self, DiscoveryError> {
        if state.seed != cfg.seed {
            return Err(DiscoveryError::Checkpoint(format!(
                "checkpoint seed {} differs from config seed {}",
                state.seed, cfg.seed
            )));
        }
        if log.last().map_or(0, |e| e.seq() + 1) != state.next_seq {
            return Err(DiscoveryError::Checkpoint(
                "log does not end where the saved state does".into(),
            ));
        }
        Ok(Self {
            ctx: RoundContext::new(panel, split, cfg)?,
            rounds: cfg.rounds,
            state,
            log,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.round >= self.rounds
    }

    /// Runs one round; returns false when the campaign was already complete.
    pub fn step(&mut self, generator: &mut dyn HypothesisGenerator) -> Result<bool, DiscoveryError> {
        if self.is_done() {
            return Ok(false);
        }
        let state = std::mem::replace(&mut self.state, AgentState::new(0));
        let (state, outcome) = run_round(state, generator, &mut self.ctx)?;
        self.state = state;
        self.log.extend(outcome.entries);
        Ok(true)
    }

    pub fn run(&mut self, generator: &mut dyn HypothesisGenerator) -> Result<(), DiscoveryError> {
        while self.step(generator)? {}
        Ok(())
    }

    pub fn finish(self) -> CampaignOutput {
        CampaignOutput {
            state: self.state,
            log: self.log,
        }
    }
}

pub fn run_campaign(
    panel: &Panel,
    split: &SplitSpec,
    cfg: &CampaignConfig,
    generator: &mut dyn HypothesisGenerator,
) -> Result<CampaignOutput, DiscoveryError> {
    let mut c = Campaign::new(panel, split, cfg)?;
    c.run(generator)?;
    Ok(c.finish())
}

pub fn resume_campaign(
    panel: &Panel,
    split: &SplitSpec,
    cfg: &CampaignConfig,
    state: AgentState,
    log: Vec<LogEntry>,
    generator: &mut dyn HypothesisGenerator,
) -> Result<CampaignOutput, DiscoveryError> {
    let mut c = Campaign::resume(panel, split, cfg, state, log)?;
    c.run(generator)?;
    Ok(c.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OosRow {
    pub expr: String,
    pub metrics: EvalMetrics,
    /// Spearman correlation of bucket index with mean bucket return.
    pub monotonicity: Option<f64>,
}

/// Evaluates a frozen library on the out-of-sample window. The result is a
/// report only; it is never fed back into any state.
pub fn oos_report(
    library: &[LibraryEntry],
    panel: &Panel,
    split: &SplitSpec,
    cfg: &EvalConfig,
) -> Result<Vec<OosRow>, DiscoveryError> {
    let ev = Evaluator::new(panel, cfg.clone(), split.oos_start, split.oos_end);
    library
        .iter()
        .map(|e| {
            let series = evaluate(&e.expr, panel)?;
            let scores = normalize_scores(&series.values, ev.config());
            let detail = ev.evaluate_normalized(&scores);
            let monotonicity = decile_backtest(&scores, ev.forward_returns(), ev.window(), cfg.quantiles)
                .ok()
                .and_then(|bt| bt.monotonicity());
            Ok(OosRow {
                expr: e.expr.canonical(),
                metrics: detail.metrics,
                monotonicity,
            })
        })
        .collect()
}
