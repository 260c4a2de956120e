//! Rule-based promotion gate.
//!
//! [`decide`] maps in-sample metrics to Promote / Hold / Retire under fixed
//! thresholds. Redundancy and feasibility screens refine the verdict in
//! [`apply_screens`].

mod feasibility;
mod redundancy;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::EvalMetrics;

pub use feasibility::{feasibility_check, FeasibilityReport, RAPID_DECAY_RATIO};
pub use redundancy::{redundancy_check, RedundancyReport, MIN_OVERLAP_DATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Retire,
    Hold,
    Promote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateThresholds {
    pub tau_sig: f64,
    pub tau_econ: f64,
    pub tau_fail: f64,
    pub hurdle_t: f64,
    pub max_abs_corr: f64,
    /// Mean daily long-short turnover ceiling (2.0 = both legs fully replaced).
    pub max_turnover: Option<f64>,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            tau_sig: 3.0,
            tau_econ: 1.0,
            tau_fail: 1.0,
            hurdle_t: 3.0,
            max_abs_corr: 0.8,
            max_turnover: None,
        }
    }
}

impl GateThresholds {
    pub fn validate(&self) -> Result<(), GateError> {
        if !(self.tau_fail < self.tau_sig) {
            return Err(GateError::InvalidThresholds(format!(
                "tau_fail {} must be below tau_sig {}",
                self.tau_fail, self.tau_sig
            )));
        }
        if !(self.max_abs_corr > 0.0 && self.max_abs_corr <= 1.0) {
            return Err(GateError::InvalidThresholds(format!(
                "max_abs_corr {} outside (0, 1]",
                self.max_abs_corr
            )));
        }
        Ok(())
    }

    /// The t-statistic a candidate must clear to be promoted.
    pub fn promotion_t(&self) -> f64 {
        self.tau_sig.max(self.hurdle_t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    /// Rule firings in evaluation order; never empty.
    pub reasons: Vec<String>,
    pub metrics: EvalMetrics,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GateError {
    #[error("protocol violation: metrics hash {metrics} differs from round hash {round}")]
    ProtocolMismatch { metrics: String, round: String },
    #[error("metrics window ends {end}, after the in-sample cutoff {cutoff}")]
    WindowLeak { end: NaiveDate, cutoff: NaiveDate },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

/// The piecewise promotion rule.
///
/// Promote iff `t >= max(tau_sig, hurdle_t)` and `sharpe >= tau_econ`;
/// Retire iff `t < tau_fail` or a required metric is undefined; Hold otherwise.
pub fn decide(
    m: &EvalMetrics,
    th: &GateThresholds,
    round_hash: &str,
) -> Result<GateDecision, GateError> {
    if m.config_hash != round_hash {
        return Err(GateError::ProtocolMismatch {
            metrics: m.config_hash.clone(),
            round: round_hash.to_string(),
        });
    }
    let (verdict, reasons) = rule(m.ic_tstat, m.sharpe, th);
    Ok(GateDecision {
        verdict,
        reasons,
        metrics: m.clone(),
        config_hash: m.config_hash.clone(),
    })
}

fn rule(t: Option<f64>, sharpe: Option<f64>, th: &GateThresholds) -> (Verdict, Vec<String>) {
    let (Some(t), Some(sharpe)) = (t, sharpe) else {
        let mut missing = Vec::new();
        if t.is_none() {
            missing.push("t_ic");
        }
        if sharpe.is_none() {
            missing.push("sharpe");
        }
        return (
            Verdict::Retire,
            vec![format!("undefined metric: {}", missing.join(", "))],
        );
    };
    let bar = th.promotion_t();
    if t >= bar && sharpe >= th.tau_econ {
        return (
            Verdict::Promote,
            vec![format!(
                "t_ic {t:.4} >= {bar} and sharpe {sharpe:.4} >= {}",
                th.tau_econ
            )],
        );
    }
    if t < th.tau_fail {
        return (
            Verdict::Retire,
            vec![format!("t_ic {t:.4} < tau_fail {}", th.tau_fail)],
        );
    }
    let why = if t < bar {
        format!("t_ic {t:.4} in [{}, {bar})", th.tau_fail)
    } else {
        format!("sharpe {sharpe:.4} < tau_econ {}", th.tau_econ)
    };
    (Verdict::Hold, vec![why])
}

/// Rejects metrics whose window reaches past the in-sample cutoff.
pub fn guard_window(m: &EvalMetrics, is_end: NaiveDate) -> Result<(), GateError> {
    match m.window_end {
        Some(end) if end > is_end => Err(GateError::WindowLeak {
            end,
            cutoff: is_end,
        }),
        _ => Ok(()),
    }
}

/// Applies redundancy and feasibility results to a base decision.
///
/// A redundant candidate is retired. A Promote that fails the turnover
/// ceiling is downgraded to Hold. The decay flag is informational.
pub fn apply_screens(
    mut decision: GateDecision,
    redundancy: Option<&RedundancyReport>,
    feasibility: Option<&FeasibilityReport>,
) -> GateDecision {
    if let Some(r) = redundancy {
        if !r.pass && decision.verdict != Verdict::Retire {
            decision.verdict = Verdict::Retire;
            decision.reasons.push(format!(
                "redundant: |avg rank corr| {:.4} with {}",
                r.max_abs_corr,
                r.most_correlated.as_deref().unwrap_or("library")
            ));
        }
    }
    if let Some(f) = feasibility {
        if !f.turnover_pass && decision.verdict == Verdict::Promote {
            decision.verdict = Verdict::Hold;
            decision.reasons.push(format!(
                "turnover {:.4} above ceiling",
                f.mean_turnover.unwrap_or(f64::NAN)
            ));
        }
        if f.rapid_decay {
            decision.reasons.push("rapid decay: H2 below 25% of H1".into());
        }
    }
    decision
}

/// Recomputes the base verdict from a stored snapshot.
pub fn replay(decision: &GateDecision, th: &GateThresholds) -> Verdict {
    rule(decision.metrics.ic_tstat, decision.metrics.sharpe, th).0
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn metrics(t: Option<f64>, sharpe: Option<f64>) -> EvalMetrics {
        EvalMetrics {
            mean_ic: Some(0.01),
            ic_tstat: t,
            icir: None,
            icl: None,
            iclir: None,
            ann_return: None,
            ann_vol: None,
            sharpe,
            sortino: None,
            calmar: None,
            max_drawdown: None,
            n_days: 100,
            n_valid_dates: 100,
            avg_coverage: 50.0,
            config_hash: "h".into(),
            window_start: None,
            window_end: None,
        }
    }

    fn verdict(t: f64, s: f64) -> Verdict {
        decide(&metrics(Some(t), Some(s)), &GateThresholds::default(), "h")
            .unwrap()
            .verdict
    }

    #[test]
    fn rule_examples() {
        assert_eq!(verdict(3.5, 2.0), Verdict::Promote);
        assert_eq!(verdict(0.5, 2.0), Verdict::Retire);
        assert_eq!(verdict(2.0, 2.0), Verdict::Hold);
        assert_eq!(verdict(3.5, 0.5), Verdict::Hold);
    }

    #[test]
    fn undefined_retires() {
        let d = decide(&metrics(None, Some(3.0)), &GateThresholds::default(), "h").unwrap();
        assert_eq!(d.verdict, Verdict::Retire);
        assert!(d.reasons[0].contains("undefined"));
    }

    #[test]
    fn hash_mismatch() {
        let err = decide(&metrics(Some(4.0), Some(2.0)), &GateThresholds::default(), "other");
        assert!(matches!(err, Err(GateError::ProtocolMismatch { .. })));
    }

    #[test]
    fn window_guard() {
        let mut m = metrics(Some(4.0), Some(2.0));
        let cut = NaiveDate::from_ymd_opt(2020, 12, 31).unwrap();
        m.window_end = NaiveDate::from_ymd_opt(2021, 1, 4);
        assert!(guard_window(&m, cut).is_err());
        m.window_end = Some(cut);
        assert!(guard_window(&m, cut).is_ok());
    }

    #[test]
    fn replay_matches() {
        let th = GateThresholds::default();
        let d = decide(&metrics(Some(2.5), Some(1.5)), &th, "h").unwrap();
        assert_eq!(replay(&d, &th), d.verdict);
    }

    #[test]
    fn thresholds_validate() {
        let bad = GateThresholds {
            tau_fail: 3.0,
            ..GateThresholds::default()
        };
        assert!(bad.validate().is_err());
        assert!(GateThresholds::default().validate().is_ok());
    }
}
