//! One propose-evaluate-gate-update step.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::generator::{HypothesisGenerator, Proposal};
use super::log::{CandidateStatus, ExperimentRecord, LogEntry, LOG_SCHEMA};
use super::{AgentState, CampaignConfig, DiscoveryError, HeldEntry, LibraryEntry, SplitSpec, Tally};
use crate::backtest::{decile_backtest, multi_horizon, turnover};
use crate::gate::{
    apply_screens, decide, feasibility_check, guard_window, redundancy_check, FeasibilityReport,
    GateDecision, GateThresholds, RedundancyReport, Verdict,
};
use crate::grammar::{evaluate, parse_expr, Budget, FactorExpr};
use crate::grid::Grid;
use crate::metrics::{normalize_scores, EvalMetrics, Evaluator};
use crate::panel::Panel;

/// Outcomes remembered for the generator's context window.
pub const RECENT_CAP: usize = 32;

/// Immutable inputs of every round plus a cache of library factor values.
pub struct RoundContext {
    panel: Panel,
    evaluator: Evaluator,
    thresholds: GateThresholds,
    budget: Budget,
    batch_size: usize,
    hold_max_rounds: usize,
    decay_horizons: usize,
    nw_lags: usize,
    is_end: NaiveDate,
    cache: BTreeMap<String, Grid>,
}

impl RoundContext {
    /// Keeps only the dates up to `split.is_end`; nothing later is visible to
    /// the loop. `panel` must already carry the primitive columns.
    pub fn new(panel: &Panel, split: &SplitSpec, cfg: &CampaignConfig) -> Result<Self, DiscoveryError> {
        split.validate()?;
        cfg.gate.validate()?;
        let last = panel.index_at_or_before(split.is_end).ok_or(DiscoveryError::EmptyInSample)?;
        if panel.dates()[last] < split.is_start {
            return Err(DiscoveryError::EmptyInSample);
        }
        let panel = panel.truncate_to(last);
        let evaluator = Evaluator::new(&panel, cfg.eval.clone(), split.is_start, split.is_end);
        Ok(Self {
            panel,
            evaluator,
            thresholds: cfg.gate.clone(),
            budget: cfg.budget,
            batch_size: cfg.generator.batch_size,
            hold_max_rounds: cfg.hold_max_rounds,
            decay_horizons: cfg.decay_horizons.max(2),
            nw_lags: cfg.nw_lags,
            is_end: split.is_end,
            cache: BTreeMap::new(),
        })
    }

    pub fn panel(&self) -> &Panel {
        &self.panel
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    fn library_grid(&mut self, entry: &LibraryEntry) -> &Grid {
        let panel = &self.panel;
        self.cache.entry(entry.hash.clone()).or_insert_with(|| {
            evaluate(&entry.expr, panel)
                .expect("library members evaluated before")
                .values
        })
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub round: usize,
    pub entries: Vec<LogEntry>,
    pub decisions: Vec<GateDecision>,
}

/// Seed of the generator RNG for `round`.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Evaluated {
    metrics: EvalMetrics,
    values: Grid,
    feasibility: FeasibilityReport,
}

fn evaluate_candidate(ctx: &RoundContext, expr: &FactorExpr) -> Result<Evaluated, String> {
    let series = evaluate(expr, &ctx.panel).map_err(|e| e.to_string())?;
    let cfg = ctx.evaluator.config();
    let scores = normalize_scores(&series.values, cfg);
    let detail = ctx.evaluator.evaluate_normalized(&scores);
    let fwd = ctx.evaluator.forward_returns();
    let bt = decile_backtest(&scores, fwd, ctx.evaluator.window(), cfg.quantiles)
        .map_err(|e| e.to_string())?;
    let to = turnover(&bt.weights, fwd);
    let horizons: Vec<f64> = multi_horizon(&bt.assignments, &bt.dates, fwd, ctx.decay_horizons, ctx.nw_lags)
        .iter()
        .map(|h| h.mean_daily.unwrap_or(f64::NAN))
        .collect();
    Ok(Evaluated {
        metrics: detail.metrics,
        values: series.values,
        feasibility: feasibility_check(&to, &horizons, ctx.thresholds.max_turnover),
    })
}

enum Screened {
    Rejected(String),
    Duplicate(FactorExpr),
    Accepted(FactorExpr),
}

fn bump(tally: &mut BTreeMap<String, Tally>, key: &str, verdict: Verdict) {
    let t = tally.entry(key.to_string()).or_default();
    t.proposed += 1;
    match verdict {
        Verdict::Promote => t.promoted += 1,
        Verdict::Hold => t.held += 1,
        Verdict::Retire => t.retired += 1,
    }
}

/// Runs round `state.round + 1` and returns the updated state.
pub fn run_round(
    mut state: AgentState,
    generator: &mut dyn HypothesisGenerator,
    ctx: &mut RoundContext,
) -> Result<(AgentState, RoundOutcome), DiscoveryError> {
    let round = state.round + 1;
    let mut seq = state.next_seq;
    let mut next_seq = || {
        seq += 1;
        seq - 1
    };
    let mut entries = vec![LogEntry::RoundStart {
        schema: LOG_SCHEMA,
        seq: next_seq(),
        round,
        library_size: state.library.len(),
        held: state.held.len(),
    }];

    let mut rng = ChaCha8Rng::seed_from_u64(round_seed(state.seed, round));
    let out = generator.propose(&state, ctx.batch_size, &mut rng);
    for event in out.events {
        entries.push(LogEntry::Generator {
            schema: LOG_SCHEMA,
            seq: next_seq(),
            round,
            event,
        });
    }

    let mut batch = BTreeSet::new();
    let screened: Vec<Screened> = out
        .proposals
        .iter()
        .map(|p| {
            let expr = match parse_expr(&p.text, &ctx.budget) {
                Ok(e) => e,
                Err(e) => return Screened::Rejected(e.to_string()),
            };
            if let Err(e) = expr.validate_no_lookahead(&ctx.budget) {
                return Screened::Rejected(e.to_string());
            }
            let h = expr.structural_hash();
            if state.is_known(&h) || !batch.insert(h) {
                Screened::Duplicate(expr)
            } else {
                Screened::Accepted(expr)
            }
        })
        .collect();

    let ctx_ref: &RoundContext = ctx;
    let evaluated: Vec<Option<Result<Evaluated, String>>> = screened
        .par_iter()
        .map(|s| match s {
            Screened::Accepted(e) => Some(evaluate_candidate(ctx_ref, e)),
            _ => None,
        })
        .collect();

    let library_snapshot = state.library.clone();
    let mut lib_grids: Vec<(String, Grid)> = Vec::with_capacity(library_snapshot.len());
    for entry in &library_snapshot {
        let g = ctx.library_grid(entry).clone();
        lib_grids.push((entry.expr.canonical(), g));
    }
    let lib_refs: Vec<(&str, &Grid)> = lib_grids.iter().map(|(n, g)| (n.as_str(), g)).collect();
    let hash = ctx.evaluator.config_hash().to_string();

    let mut decisions = Vec::new();
    let mut new_held = Vec::new();
    for (i, (p, (s, ev))) in out.proposals.iter().zip(screened.into_iter().zip(evaluated)).enumerate() {
        let mut rec = record_base(round, i, p, &hash);
        match (s, ev) {
            (Screened::Rejected(err), _) => {
                rec.status = CandidateStatus::Rejected;
                rec.error = Some(err);
            }
            (Screened::Duplicate(e), _) => {
                rec.status = CandidateStatus::Duplicate;
                rec.canonical = Some(e.canonical());
                rec.hash = Some(e.structural_hash());
            }
            (Screened::Accepted(e), Some(Err(err))) => {
                rec.status = CandidateStatus::Rejected;
                rec.canonical = Some(e.canonical());
                rec.hash = Some(e.structural_hash());
                rec.error = Some(err);
            }
            (Screened::Accepted(e), Some(Ok(ev))) => {
                let h = e.structural_hash();
                rec.canonical = Some(e.canonical());
                rec.hash = Some(h.clone());
                guard_window(&ev.metrics, ctx.is_end)?;
                let base = decide(&ev.metrics, &ctx.thresholds, &hash)?;
                let red: RedundancyReport = redundancy_check(
                    &ev.values,
                    &lib_refs,
                    ctx.evaluator.window(),
                    ctx.thresholds.max_abs_corr,
                );
                let d = apply_screens(base, Some(&red), Some(&ev.feasibility));
                for op in e.operators().into_iter().collect::<BTreeSet<_>>() {
                    bump(&mut state.operator_tally, op.name(), d.verdict);
                }
                for prim in e.primitives().into_iter().collect::<BTreeSet<_>>() {
                    bump(&mut state.primitive_tally, prim.name(), d.verdict);
                }
                state.recent.push(super::RecentOutcome {
                    round,
                    expr: e.canonical(),
                    verdict: d.verdict,
                    ic_tstat: ev.metrics.ic_tstat,
                    sharpe: ev.metrics.sharpe,
                });
                match d.verdict {
                    Verdict::Promote => {
                        ctx.cache.insert(h.clone(), ev.values);
                        state.library.push(LibraryEntry {
                            expr: e,
                            hash: h,
                            rationale: p.rationale.clone(),
                            metrics: ev.metrics.clone(),
                            round,
                        });
                    }
                    Verdict::Hold => new_held.push(HeldEntry {
                        expr: e,
                        hash: h,
                        rationale: p.rationale.clone(),
                        metrics: ev.metrics.clone(),
                        rounds_held: 1,
                    }),
                    Verdict::Retire => {
                        state.retired.insert(h);
                    }
                }
                rec.status = CandidateStatus::Evaluated;
                rec.metrics = Some(ev.metrics);
                rec.redundancy = Some(red);
                rec.feasibility = Some(ev.feasibility);
                rec.decision = Some(d.clone());
                decisions.push(d);
            }
            (Screened::Accepted(_), None) => unreachable!("accepted candidates are evaluated"),
        }
        entries.push(LogEntry::Candidate {
            schema: LOG_SCHEMA,
            seq: next_seq(),
            record: Box::new(rec),
        });
    }

    // Age candidates held from earlier rounds.
    let mut aged = Vec::new();
    state.held.retain_mut(|h| {
        h.rounds_held += 1;
        if h.rounds_held >= ctx.hold_max_rounds {
            aged.push(h.expr.canonical());
            state.retired.insert(h.hash.clone());
            false
        } else {
            true
        }
    });
    if !aged.is_empty() {
        entries.push(LogEntry::Aged {
            schema: LOG_SCHEMA,
            seq: next_seq(),
            round,
            retired: aged,
        });
    }
    state.held.extend(new_held);
    let excess = state.recent.len().saturating_sub(RECENT_CAP);
    state.recent.drain(..excess);
    state.round = round;
    state.next_seq = seq;
    Ok((
        state,
        RoundOutcome {
            round,
            entries,
            decisions,
        },
    ))
}

fn record_base(round: usize, index: usize, p: &Proposal, hash: &str) -> ExperimentRecord {
    ExperimentRecord {
        round,
        index,
        expr: p.text.clone(),
        canonical: None,
        hash: None,
        rationale: p.rationale.clone(),
        source: p.source,
        parent: p.parent.clone(),
        status: CandidateStatus::Rejected,
        error: None,
        metrics: None,
        decision: None,
        redundancy: None,
        feasibility: None,
        config_hash: hash.to_string(),
    }
}
