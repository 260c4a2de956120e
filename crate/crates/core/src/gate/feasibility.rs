//! Implementation-feasibility screen: turnover ceiling and decay flag.

use serde::{Deserialize, Serialize};

use crate::stats::mean;

/// H2 below this fraction of a positive H1 flags rapid decay.
pub const RAPID_DECAY_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub mean_turnover: Option<f64>,
    pub turnover_pass: bool,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    pub rapid_decay: bool,
}

/// `horizon_means[h - 1]` is the mean spread return at holding horizon `h`.
pub fn feasibility_check(
    turnover: &[f64],
    horizon_means: &[f64],
    max_turnover: Option<f64>,
) -> FeasibilityReport {
    let mean_turnover = (!turnover.is_empty()).then(|| mean(turnover));
    let turnover_pass = match (max_turnover, mean_turnover) {
        (Some(cap), Some(t)) => t <= cap,
        _ => true,
    };
    let h1 = horizon_means.first().copied().filter(|v| v.is_finite());
    let h2 = horizon_means.get(1).copied().filter(|v| v.is_finite());
    let rapid_decay = matches!((h1, h2), (Some(a), Some(b)) if a > 0.0 && b < RAPID_DECAY_RATIO * a);
    FeasibilityReport {
        mean_turnover,
        turnover_pass,
        h1,
        h2,
        rapid_decay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_portfolio_passes() {
        let r = feasibility_check(&[0.0; 10], &[0.001, 0.001], Some(0.5));
        assert!(r.turnover_pass);
        assert!(!r.rapid_decay);
    }

    #[test]
    fn decay_flag() {
        let r = feasibility_check(&[], &[0.40, 0.05], None);
        assert!(r.rapid_decay);
        let r = feasibility_check(&[], &[0.40, 0.39, 0.38], None);
        assert!(!r.rapid_decay);
    }

    #[test]
    fn turnover_ceiling() {
        let r = feasibility_check(&[1.5, 1.7], &[], Some(1.0));
        assert!(!r.turnover_pass);
        assert_eq!(r.mean_turnover, Some(1.6));
    }
}
