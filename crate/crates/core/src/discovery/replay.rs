//! Re-proposes the candidates recorded in a log, for offline replay.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::generator::{GeneratorOutput, HypothesisGenerator, Proposal};
use super::log::LogEntry;
use super::AgentState;

/// Yields, for each round, the proposals recorded for that round in their
/// original order. The RNG and the requested count are ignored.
#[derive(Debug, Clone, Default)]
pub struct ReplayGenerator {
    rounds: BTreeMap<usize, Vec<Proposal>>,
}

impl ReplayGenerator {
    pub fn from_log(entries: &[LogEntry]) -> Self {
        let mut rounds: BTreeMap<usize, Vec<(usize, Proposal)>> = BTreeMap::new();
        for r in entries.iter().filter_map(LogEntry::as_candidate) {
            rounds.entry(r.round).or_default().push((
                r.index,
                Proposal {
                    text: r.expr.clone(),
                    rationale: r.rationale.clone(),
                    source: r.source,
                    parent: r.parent.clone(),
                },
            ));
        }
        Self {
            rounds: rounds
                .into_iter()
                .map(|(k, mut v)| {
                    v.sort_by_key(|p| p.0);
                    (k, v.into_iter().map(|p| p.1).collect())
                })
                .collect(),
        }
    }
}

impl HypothesisGenerator for ReplayGenerator {
    fn propose(&mut self, state: &AgentState, _n: usize, _rng: &mut ChaCha8Rng) -> GeneratorOutput {
        GeneratorOutput {
            proposals: self.rounds.get(&(state.round + 1)).cloned().unwrap_or_default(),
            events: Vec::new(),
        }
    }
}
