//! Append-only experiment log (newline-delimited JSON).
//!
//! Entries carry a logical sequence number rather than a wall-clock time so
//! that identical runs produce identical bytes.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::generator::{GeneratorEvent, Source};
use super::DiscoveryError;
use crate::gate::{FeasibilityReport, GateDecision, RedundancyReport};
use crate::metrics::EvalMetrics;

pub const LOG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    /// Parsed, evaluated and gated.
    Evaluated,
    /// Failed to parse or violated the budget / causality rules.
    Rejected,
    /// Structural hash already promoted, held, retired, or earlier in the batch.
    Duplicate,
}

/// One proposal and everything decided about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub round: usize,
    /// Position within the round's batch.
    pub index: usize,
    /// The proposal text exactly as generated.
    pub expr: String,
    pub canonical: Option<String>,
    pub hash: Option<String>,
    pub rationale: String,
    pub source: Source,
    pub parent: Option<String>,
    pub status: CandidateStatus,
    pub error: Option<String>,
    pub metrics: Option<EvalMetrics>,
    pub decision: Option<GateDecision>,
    pub redundancy: Option<RedundancyReport>,
    pub feasibility: Option<FeasibilityReport>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    RoundStart {
        schema: u32,
        seq: u64,
        round: usize,
        library_size: usize,
        held: usize,
    },
    Generator {
        schema: u32,
        seq: u64,
        round: usize,
        #[serde(flatten)]
        event: GeneratorEvent,
    },
    Candidate {
        schema: u32,
        seq: u64,
        #[serde(flatten)]
        record: Box<ExperimentRecord>,
    },
    /// Held candidates that reached the aging limit.
    Aged {
        schema: u32,
        seq: u64,
        round: usize,
        retired: Vec<String>,
    },
}

impl LogEntry {
    pub fn seq(&self) -> u64 {
        match self {
            LogEntry::RoundStart { seq, .. }
            | LogEntry::Generator { seq, .. }
            | LogEntry::Candidate { seq, .. }
            | LogEntry::Aged { seq, .. } => *seq,
        }
    }

    pub fn as_candidate(&self) -> Option<&ExperimentRecord> {
        match self {
            LogEntry::Candidate { record, .. } => Some(record),
            _ => None,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log entry serializes")
    }
}

pub fn write_log<W: Write>(out: &mut W, entries: &[LogEntry]) -> std::io::Result<()> {
    for e in entries {
        writeln!(out, "{}", e.to_line())?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogEntry>, DiscoveryError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|source| DiscoveryError::Log { line: i + 1, source })?;
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_comments() {
        let entries = vec![
            LogEntry::RoundStart {
                schema: LOG_SCHEMA,
                seq: 0,
                round: 1,
                library_size: 0,
                held: 0,
            },
            LogEntry::Generator {
                schema: LOG_SCHEMA,
                seq: 1,
                round: 1,
                event: GeneratorEvent::Downgrade { reason: "timeout".into() },
            },
        ];
        let mut buf = b"# header\n".to_vec();
        write_log(&mut buf, &entries).unwrap();
        let back = read_log(buf.as_slice()).unwrap();
        assert_eq!(back, entries);
        assert_eq!(back[1].seq(), 1);
    }
}
