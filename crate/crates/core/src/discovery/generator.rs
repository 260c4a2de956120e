//! Hypothesis generators.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentState, GeneratorConfig};
use crate::grammar::{
    random_expr, BinaryOp, Budget, CsOp, FactorExpr, Primitive, UnaryOp, WindowOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Baseline,
    Llm,
}

/// A proposed expression as text, so that malformed proposals can be logged
/// verbatim before parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub text: String,
    pub rationale: String,
    pub source: Source,
    /// Canonical text of the survivor this proposal mutates.
    pub parent: Option<String>,
}

/// Side information a generator wants recorded in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GeneratorEvent {
    /// Request and raw reply of a model call. Credentials are never included.
    LlmExchange {
        endpoint: String,
        request: serde_json::Value,
        response: Option<String>,
        error: Option<String>,
    },
    /// The round fell back to the baseline generator.
    Downgrade { reason: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratorOutput {
    pub proposals: Vec<Proposal>,
    pub events: Vec<GeneratorEvent>,
}

pub trait HypothesisGenerator {
    /// Up to `n` proposals given the current state. All randomness must come
    /// from `rng`, which the loop seeds from `(seed, round)`.
    fn propose(&mut self, state: &AgentState, n: usize, rng: &mut ChaCha8Rng) -> GeneratorOutput;
}

/// Proposes nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullGenerator;

impl HypothesisGenerator for NullGenerator {
    fn propose(&mut self, _: &AgentState, _: usize, _: &mut ChaCha8Rng) -> GeneratorOutput {
        GeneratorOutput::default()
    }
}

const EXPLORE_WINDOWS: [u32; 3] = [5, 10, 20];
const WINDOW_STEPS: [i64; 3] = [1, 2, 5];
const MAX_ATTEMPTS: usize = 64;

fn describe(p: Primitive) -> &'static str {
    match p {
        Primitive::Ret => "the daily return",
        Primitive::MktRet => "the market return",
        Primitive::Price => "the price level",
        Primitive::Volume => "share volume",
        Primitive::VolRatio => "volume relative to its 20-day mean",
        Primitive::Rvol20 => "20-day realized volatility",
        Primitive::PriceMa => "price relative to its 20-day mean",
        Primitive::MktVol => "market volatility",
        Primitive::VolGrowth => "day-over-day volume growth",
        Primitive::Spread => "the quoted bid-ask spread",
    }
}

fn primitive_list(e: &FactorExpr) -> String {
    let names: Vec<&str> = e.primitives().into_iter().map(describe).collect();
    if names.is_empty() {
        "constants".into()
    } else {
        names.join(" and ")
    }
}

/// Template exploration plus local mutation of survivors.
#[derive(Debug, Clone)]
pub struct BaselineGenerator {
    pub p_exploit: f64,
    pub budget: Budget,
}

impl BaselineGenerator {
    pub fn new(cfg: &GeneratorConfig, budget: Budget) -> Self {
        Self {
            p_exploit: cfg.p_exploit,
            budget,
        }
    }

    /// Primitive with the fewest proposals so far, ties broken at random.
    fn least_covered(&self, coverage: &BTreeMap<Primitive, u32>, rng: &mut ChaCha8Rng) -> Primitive {
        let min = Primitive::ALL.iter().map(|p| coverage[p]).min().unwrap_or(0);
        let ties: Vec<Primitive> = Primitive::ALL.into_iter().filter(|p| coverage[p] == min).collect();
        *ties.choose(rng).expect("at least one primitive")
    }

    fn explore(&self, coverage: &BTreeMap<Primitive, u32>, rng: &mut ChaCha8Rng) -> (FactorExpr, String) {
        let p = self.least_covered(coverage, rng);
        let x = FactorExpr::prim(p);
        let w = *EXPLORE_WINDOWS.choose(rng).unwrap();
        // An untried primitive is first tested on its own.
        let template = if coverage[&p] == 0 { 0 } else { rng.random_range(1..8) };
        let d = describe(p);
        match template {
            0 => (FactorExpr::cs(CsOp::Rank, x), format!("Stocks ranked by {d} may differ in next-day returns.")),
            1 => (
                FactorExpr::cs(CsOp::Rank, FactorExpr::window(WindowOp::Delta, x, w)),
                format!("A {w}-day change in {d} may carry news not yet priced."),
            ),
            2 => (
                FactorExpr::cs(CsOp::ZScore, FactorExpr::window(WindowOp::RollingMean, x, w)),
                format!("Smoothing {d} over {w} days isolates its persistent component."),
            ),
            3 => (
                FactorExpr::cs(
                    CsOp::Rank,
                    FactorExpr::binary(
                        BinaryOp::Div,
                        x.clone(),
                        FactorExpr::window(WindowOp::RollingMean, x, w),
                    ),
                ),
                format!("Deviation of {d} from its {w}-day average measures an unusual day."),
            ),
            4 => (
                FactorExpr::cs(
                    CsOp::Rank,
                    FactorExpr::unary(UnaryOp::Neg, FactorExpr::window(WindowOp::RollingStd, x, w)),
                ),
                format!("Stable {d} over {w} days may signal lower risk and a premium."),
            ),
            5 => {
                let q = *Primitive::ALL.choose(rng).unwrap();
                (
                    FactorExpr::cs(CsOp::Rank, FactorExpr::binary(BinaryOp::Mul, x, FactorExpr::prim(q))),
                    format!("{d} may matter more when {} is high.", describe(q)),
                )
            }
            6 => (
                FactorExpr::cs(CsOp::ZScore, FactorExpr::unary(UnaryOp::Neg, x)),
                format!("Extreme {d} may reverse the next day."),
            ),
            _ => {
                let e = random_expr(rng, &self.budget);
                let r = format!("Unstructured combination of {}.", primitive_list(&e));
                (e, r)
            }
        }
    }

    fn mutate(&self, parent: &FactorExpr, rng: &mut ChaCha8Rng) -> (FactorExpr, String) {
        match rng.random_range(0..3) {
            0 => {
                let (e, what) = swap_operator(parent, rng);
                (e, format!("Variant of a survivor with {what}."))
            }
            1 => {
                let (e, what) = perturb_window(parent, rng);
                (e, format!("Variant of a survivor with {what}."))
            }
            _ => {
                let op = if rng.random_bool(0.5) { CsOp::Rank } else { CsOp::ZScore };
                let inner = match parent {
                    FactorExpr::Cs(_, a) => (**a).clone(),
                    other => other.clone(),
                };
                let e = FactorExpr::cs(op, inner);
                let name = if op == CsOp::Rank { "cs_rank" } else { "cs_zscore" };
                (e, format!("Survivor re-normalized with {name} to change tail weighting."))
            }
        }
    }
}

/// Applies `f` to the `target`-th node in preorder.
fn rewrite_nth(e: &FactorExpr, target: usize, f: &mut dyn FnMut(&FactorExpr) -> FactorExpr) -> FactorExpr {
    fn go(e: &FactorExpr, target: usize, idx: &mut usize, f: &mut dyn FnMut(&FactorExpr) -> FactorExpr) -> FactorExpr {
        let me = *idx;
        *idx += 1;
        if me == target {
            return f(e);
        }
        match e {
            FactorExpr::Primitive(_) | FactorExpr::Const(_) => e.clone(),
            FactorExpr::Unary(op, a) => FactorExpr::unary(*op, go(a, target, idx, f)),
            FactorExpr::Binary(op, a, b) => {
                let a = go(a, target, idx, f);
                FactorExpr::binary(*op, a, go(b, target, idx, f))
            }
            FactorExpr::Window(op, a, w) => FactorExpr::window(*op, go(a, target, idx, f), *w),
            FactorExpr::Cs(op, a) => FactorExpr::cs(*op, go(a, target, idx, f)),
        }
    }
    go(e, target, &mut 0, f)
}

fn preorder(e: &FactorExpr) -> Vec<&FactorExpr> {
    let mut out = vec![e];
    for c in e.children() {
        out.extend(preorder(c));
    }
    out
}

fn swap_operator(parent: &FactorExpr, rng: &mut ChaCha8Rng) -> (FactorExpr, String) {
    let nodes = preorder(parent);
    let ops: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].operator().is_some()).collect();
    let Some(&target) = ops.choose(rng) else {
        return (FactorExpr::cs(CsOp::Rank, parent.clone()), "a cs_rank wrapper".into());
    };
    let mut what = String::new();
    let e = rewrite_nth(parent, target, &mut |n| match n {
        FactorExpr::Unary(op, a) => {
            let alts: Vec<UnaryOp> = [UnaryOp::Neg, UnaryOp::Abs, UnaryOp::Log1p, UnaryOp::Sign]
                .into_iter()
                .filter(|o| o != op)
                .collect();
            let new = *alts.choose(rng).unwrap();
            let out = FactorExpr::unary(new, (**a).clone());
            what = format!("{} in place of {}", out.operator().unwrap().name(), n.operator().unwrap().name());
            out
        }
        FactorExpr::Binary(op, a, b) => {
            let alts: Vec<BinaryOp> = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]
                .into_iter()
                .filter(|o| o != op)
                .collect();
            let out = FactorExpr::binary(*alts.choose(rng).unwrap(), (**a).clone(), (**b).clone());
            what = format!("{} in place of {}", out.operator().unwrap().name(), n.operator().unwrap().name());
            out
        }
        FactorExpr::Window(op, a, w) => {
            let alts: Vec<WindowOp> = [
                WindowOp::Lag,
                WindowOp::RollingMean,
                WindowOp::RollingStd,
                WindowOp::RollingSum,
                WindowOp::RollingMax,
                WindowOp::RollingMin,
                WindowOp::Delta,
            ]
            .into_iter()
            .filter(|o| o != op)
            .collect();
            let out = FactorExpr::window(*alts.choose(rng).unwrap(), (**a).clone(), *w);
            what = format!("{} in place of {}", out.operator().unwrap().name(), n.operator().unwrap().name());
            out
        }
        FactorExpr::Cs(op, a) => {
            let new = if *op == CsOp::Rank { CsOp::ZScore } else { CsOp::Rank };
            let out = FactorExpr::cs(new, (**a).clone());
            what = format!("{} in place of {}", out.operator().unwrap().name(), n.operator().unwrap().name());
            out
        }
        other => other.clone(),
    });
    (e, what)
}

fn perturb_window(parent: &FactorExpr, rng: &mut ChaCha8Rng) -> (FactorExpr, String) {
    let nodes = preorder(parent);
    let wins: Vec<usize> = (0..nodes.len())
        .filter(|&i| matches!(nodes[i], FactorExpr::Window(..)))
        .collect();
    let Some(&target) = wins.choose(rng) else {
        // No window to perturb: smooth the whole expression instead.
        let w = *EXPLORE_WINDOWS.choose(rng).unwrap();
        return (
            FactorExpr::window(WindowOp::RollingMean, parent.clone(), w),
            format!("a {w}-day rolling mean"),
        );
    };
    let mut what = String::new();
    let e = rewrite_nth(parent, target, &mut |n| match n {
        FactorExpr::Window(op, a, w) => {
            let step = *WINDOW_STEPS.choose(rng).unwrap();
            let signed = if rng.random_bool(0.5) { step } else { -step };
            let new_w = (*w as i64 + signed).max(1) as u32;
            let new_w = if new_w == *w { w + step as u32 } else { new_w };
            what = format!("window {new_w} instead of {w}");
            FactorExpr::window(*op, (**a).clone(), new_w)
        }
        other => other.clone(),
    });
    (e, what)
}

impl HypothesisGenerator for BaselineGenerator {
    fn propose(&mut self, state: &AgentState, n: usize, rng: &mut ChaCha8Rng) -> GeneratorOutput {
        let pool: Vec<&FactorExpr> = state
            .library
            .iter()
            .map(|e| &e.expr)
            .chain(state.held.iter().map(|e| &e.expr))
            .collect();
        let mut coverage: BTreeMap<Primitive, u32> = Primitive::ALL
            .into_iter()
            .map(|p| (p, state.primitive_tally.get(p.name()).map_or(0, |t| t.proposed)))
            .collect();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut proposals = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..MAX_ATTEMPTS {
                let exploit = !pool.is_empty() && rng.random::<f64>() < self.p_exploit;
                let (expr, rationale, parent) = if exploit {
                    let parent = *pool.choose(rng).unwrap();
                    let (e, r) = self.mutate(parent, rng);
                    (e, r, Some(parent.canonical()))
                } else {
                    let (e, r) = self.explore(&coverage, rng);
                    (e, r, None)
                };
                if expr.validate_no_lookahead(&self.budget).is_err() {
                    continue;
                }
                let hash = expr.structural_hash();
                if state.is_known(&hash) || !seen.insert(hash) {
                    continue;
                }
                for p in expr.primitives() {
                    *coverage.get_mut(&p).unwrap() += 1;
                }
                proposals.push(Proposal {
                    text: expr.canonical(),
                    rationale,
                    source: Source::Baseline,
                    parent,
                });
                break;
            }
        }
        GeneratorOutput {
            proposals,
            events: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_expr;
    use rand::SeedableRng;

    fn baseline() -> BaselineGenerator {
        BaselineGenerator::new(&GeneratorConfig::default(), Budget::default())
    }

    #[test]
    fn zero_request_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(baseline().propose(&AgentState::new(1), 0, &mut rng).proposals.is_empty());
    }

    #[test]
    fn empty_pool_explores_and_covers_primitives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = baseline().propose(&AgentState::new(1), 10, &mut rng);
        assert_eq!(out.proposals.len(), 10);
        assert!(out.proposals.iter().all(|p| p.parent.is_none()));
        // the first pass ranks every primitive once
        let texts: BTreeSet<String> = out.proposals.iter().map(|p| p.text.clone()).collect();
        for p in Primitive::ALL {
            assert!(texts.contains(&format!("cs_rank({})", p.name())), "{}", p.name());
        }
    }

    #[test]
    fn deterministic_for_fixed_seed_and_state() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            baseline().propose(&AgentState::new(99), 16, &mut rng).proposals
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn proposals_parse_and_respect_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Budget::default();
        for p in baseline().propose(&AgentState::new(3), 64, &mut rng).proposals {
            let e = parse_expr(&p.text, &b).unwrap();
            assert!(e.validate_no_lookahead(&b).is_ok());
            assert!(!p.rationale.is_empty());
        }
    }

    #[test]
    fn window_perturbation_changes_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let parent: FactorExpr = "cs_rank(rolling_mean(volume, 10))".parse().unwrap();
        for _ in 0..20 {
            let (e, _) = perturb_window(&parent, &mut rng);
            let FactorExpr::Cs(_, inner) = &e else { panic!() };
            let FactorExpr::Window(_, _, w) = **inner else { panic!() };
            assert!([5, 8, 9, 11, 12, 15].contains(&w), "{w}");
        }
    }
}
